#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <fingerfab/geometry.hpp>

namespace fingerfab {

enum class StlFormat { binary, ascii };

class StlError : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

/// Parses binary or ASCII STL. Input starting with "solid" is tried as ASCII
/// first and falls back to binary when the ASCII grammar fails and the byte
/// count is consistent with a binary body. One vertex triple per facet; no
/// vertex welding.
TriangleMesh parse_stl(std::span<const std::byte> bytes);
TriangleMesh parse_stl(std::string_view bytes);

/// Binary output is exactly 84 + 50 * triangle_count bytes. Missing facet
/// normals are computed from the winding (zero for degenerate facets).
std::vector<std::byte> write_stl(const TriangleMesh& mesh, StlFormat format);

TriangleMesh read_stl_file(const std::filesystem::path& path);
void write_stl_file(const std::filesystem::path& path, const TriangleMesh& mesh, StlFormat format);

}  // namespace fingerfab
