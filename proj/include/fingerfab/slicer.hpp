#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <fingerfab/gcode.hpp>
#include <fingerfab/geometry.hpp>

namespace fingerfab {

enum class Adhesion { none, brim, skirt, raft };

const char* adhesion_name(Adhesion a);
Adhesion parse_adhesion(std::string_view name);

enum class SlicerMode { stub, external };

struct SliceConfig {
  double layer_height = 0.2;
  double infill_density = 0.2;
  Adhesion adhesion = Adhesion::none;
  double z_offset = 0.0;
  std::vector<std::string> post_print_commands;
  std::vector<std::string> command_template{"prusa-slicer", "--export-gcode", "{params}", "{input}",
                                            "--output", "{output}"};
  SlicerMode mode = SlicerMode::stub;

  /// Throws std::invalid_argument on layer_height <= 0 or density outside [0, 1].
  void validate() const;
};

/// Whitespace tokenization for templates read from config or flags.
std::vector<std::string> split_template(std::string_view text);

class SlicerError : public std::runtime_error {
 public:
  SlicerError(const std::string& what, int exit_code = -1, std::string log = {})
      : std::runtime_error(what), exit_code_(exit_code), log_(std::move(log)) {}
  int exit_code() const { return exit_code_; }
  const std::string& log() const { return log_; }

 private:
  int exit_code_;
  std::string log_;
};

/// Parameter tokens in fixed order; lengths with 3 decimals, density as an
/// integer percent.
std::vector<std::string> render_parameters(const SliceConfig& cfg);

/// Substitutes {input}, {output} (anywhere in a token) and {params} (whole
/// token, expands to render_parameters). Throws SlicerError when any of the
/// three placeholders is missing.
std::vector<std::string> build_command(const SliceConfig& cfg, const std::filesystem::path& input,
                                       const std::filesystem::path& output);

struct SliceResult {
  std::filesystem::path gcode_path;
  int slicer_exit_code = 0;
  std::string log;
};

/// Deterministic stand-in for a real slicer. Always emits one bare G28 and
/// one G29 so downstream safety edits have work to do.
GcodeDocument stub_slice(const TriangleMesh& mesh, const SliceConfig& cfg);

/// Layer count used by the stub: ceil(height / layer_height).
int stub_layer_count(double height, double layer_height);

std::string mesh_hash(const TriangleMesh& mesh);

/// Stub mode slices in process; external mode spawns the templated command.
/// Output defaults to mesh_file with a .gcode extension.
SliceResult run_slicer(const SliceConfig& cfg, const std::filesystem::path& mesh_file,
                       std::filesystem::path output = {});

}  // namespace fingerfab
