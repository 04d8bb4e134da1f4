#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <fingerfab/geometry.hpp>

namespace fingerfab::testing {

// Soup of n random triangles, coordinates uniform in [lo, hi].
inline TriangleMesh random_mesh(std::mt19937_64& gen, int n, double lo = -10.0, double hi = 10.0) {
  std::uniform_real_distribution<double> coord(lo, hi);
  TriangleMesh m;
  for (int t = 0; t < n; ++t) {
    const auto base = static_cast<std::uint32_t>(m.vertices.size());
    for (int k = 0; k < 3; ++k) m.vertices.emplace_back(coord(gen), coord(gen), coord(gen));
    m.triangles.push_back({base, base + 1, base + 2});
  }
  return m;
}

// Bounding box from the triangle corners, not from the vertex list.
inline Aabb brute_force_bbox(const TriangleMesh& m) {
  Aabb b{Vec3::Constant(1e300), Vec3::Constant(-1e300)};
  for (const auto& t : m.triangles) {
    for (auto i : t) {
      for (int a = 0; a < 3; ++a) {
        const double v = m.vertices[i][a];
        if (v < b.min[a]) b.min[a] = v;
        if (v > b.max[a]) b.max[a] = v;
      }
    }
  }
  return b;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("fingerfab-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::filesystem::path source_dir() { return FINGERFAB_SOURCE_DIR; }

}  // namespace fingerfab::testing
