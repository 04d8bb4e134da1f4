#include <fingerfab/slicer.hpp>

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <fingerfab/stl.hpp>

extern char** environ;

namespace fingerfab {
namespace {

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  // Avoid "-0.000".
  if (std::strcmp(buf, "-0.000") == 0) return "0.000";
  return buf;
}

void replace_all(std::string& s, std::string_view from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void add(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  }
};

}  // namespace

const char* adhesion_name(Adhesion a) {
  switch (a) {
    case Adhesion::none:
      return "none";
    case Adhesion::brim:
      return "brim";
    case Adhesion::skirt:
      return "skirt";
    case Adhesion::raft:
      return "raft";
  }
  return "none";
}

Adhesion parse_adhesion(std::string_view name) {
  for (auto a : {Adhesion::none, Adhesion::brim, Adhesion::skirt, Adhesion::raft}) {
    if (name == adhesion_name(a)) return a;
  }
  throw std::invalid_argument("unknown adhesion option '" + std::string(name) + "'");
}

void SliceConfig::validate() const {
  if (!(layer_height > 0.0) || !std::isfinite(layer_height)) {
    throw std::invalid_argument("layer_height must be > 0");
  }
  if (!(infill_density >= 0.0 && infill_density <= 1.0)) {
    throw std::invalid_argument("infill_density must be within [0, 1]");
  }
  if (!std::isfinite(z_offset)) {
    throw std::invalid_argument("z_offset must be finite");
  }
}

std::vector<std::string> split_template(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const auto start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::vector<std::string> render_parameters(const SliceConfig& cfg) {
  cfg.validate();
  std::vector<std::string> p;
  p.insert(p.end(), {"--layer-height", fixed3(cfg.layer_height)});
  const auto percent = static_cast<long>(std::lround(cfg.infill_density * 100.0));
  p.insert(p.end(), {"--fill-density", std::to_string(percent) + "%"});
  switch (cfg.adhesion) {
    case Adhesion::none:
      p.insert(p.end(), {"--skirts", "0", "--brim-width", fixed3(0.0), "--raft-layers", "0"});
      break;
    case Adhesion::skirt:
      p.insert(p.end(), {"--skirts", "1", "--brim-width", fixed3(0.0), "--raft-layers", "0"});
      break;
    case Adhesion::brim:
      p.insert(p.end(), {"--skirts", "0", "--brim-width", fixed3(5.0), "--raft-layers", "0"});
      break;
    case Adhesion::raft:
      p.insert(p.end(), {"--skirts", "0", "--brim-width", fixed3(0.0), "--raft-layers", "2"});
      break;
  }
  p.insert(p.end(), {"--z-offset", fixed3(cfg.z_offset)});
  if (!cfg.post_print_commands.empty()) {
    std::string end;
    for (const auto& c : cfg.post_print_commands) {
      if (!end.empty()) end += '\n';
      end += c;
    }
    p.insert(p.end(), {"--end-gcode", end});
  }
  return p;
}

std::vector<std::string> build_command(const SliceConfig& cfg, const std::filesystem::path& input,
                                       const std::filesystem::path& output) {
  bool has_input = false, has_output = false, has_params = false;
  for (const auto& tok : cfg.command_template) {
    has_input |= tok.find("{input}") != std::string::npos;
    has_output |= tok.find("{output}") != std::string::npos;
    has_params |= tok == "{params}";
  }
  std::string missing;
  if (!has_input) missing += " {input}";
  if (!has_output) missing += " {output}";
  if (!has_params) missing += " {params}";
  if (!missing.empty()) {
    throw SlicerError("slicer command template is missing placeholder(s):" + missing);
  }

  std::vector<std::string> tokens;
  for (const auto& tok : cfg.command_template) {
    if (tok == "{params}") {
      const auto params = render_parameters(cfg);
      tokens.insert(tokens.end(), params.begin(), params.end());
      continue;
    }
    std::string t = tok;
    replace_all(t, "{input}", input.string());
    replace_all(t, "{output}", output.string());
    tokens.push_back(std::move(t));
  }
  return tokens;
}

int stub_layer_count(double height, double layer_height) {
  if (height <= 0.0) return 0;
  // Tolerate representation error, e.g. 1.0 / 0.2.
  return static_cast<int>(std::ceil(height / layer_height - 1e-9));
}

std::string mesh_hash(const TriangleMesh& mesh) {
  Fnv1a h;
  for (const auto& v : mesh.vertices) {
    const double xyz[3] = {v.x(), v.y(), v.z()};
    h.add(xyz, sizeof xyz);
  }
  for (const auto& t : mesh.triangles) h.add(t.data(), sizeof(std::uint32_t) * 3);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h.h));
  return buf;
}

GcodeDocument stub_slice(const TriangleMesh& mesh, const SliceConfig& cfg) {
  cfg.validate();
  const Aabb bb = bounding_box(mesh);
  const int layers = stub_layer_count(bb.max.z() - bb.min.z(), cfg.layer_height);

  GcodeDocument doc;
  auto add = [&](std::string text) { doc.lines.push_back(make_line(std::move(text))); };
  add("; generated by fingerfab stub slicer");
  add("; mesh_hash: " + mesh_hash(mesh));
  add("; layer_height: " + fixed3(cfg.layer_height));
  add("; infill_density: " + std::to_string(std::lround(cfg.infill_density * 100.0)) + "%");
  add(std::string("; adhesion: ") + adhesion_name(cfg.adhesion));
  add("; z_offset: " + fixed3(cfg.z_offset));
  add("; layer_count: " + std::to_string(layers));
  add("G21");
  add("G90");
  add("M82");
  add("G28");
  add("G29");
  for (int i = 0; i < layers; ++i) {
    add("; LAYER:" + std::to_string(i));
    add("G1 Z" + fixed3(cfg.layer_height * (i + 1)) + " F600");
    const bool even = i % 2 == 0;
    const double x = even ? bb.max.x() : bb.min.x();
    const double y = even ? bb.max.y() : bb.min.y();
    add("G1 X" + fixed3(x) + " Y" + fixed3(y) + " F1200");
  }
  add("; end of print");
  return doc;
}

namespace {

SliceResult run_external(const SliceConfig& cfg, const std::filesystem::path& mesh_file,
                         const std::filesystem::path& output) {
  const auto tokens = build_command(cfg, mesh_file, output);
  std::vector<char*> argv;
  for (const auto& t : tokens) argv.push_back(const_cast<char*>(t.c_str()));
  argv.push_back(nullptr);

  int pipefd[2];
  if (::pipe(pipefd) != 0) throw SlicerError(std::string("pipe failed: ") + std::strerror(errno));

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addclose(&actions, pipefd[0]);
  posix_spawn_file_actions_adddup2(&actions, pipefd[1], STDOUT_FILENO);
  posix_spawn_file_actions_adddup2(&actions, pipefd[1], STDERR_FILENO);
  posix_spawn_file_actions_addclose(&actions, pipefd[1]);

  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(pipefd[1]);
  if (rc != 0) {
    ::close(pipefd[0]);
    throw SlicerError("cannot run slicer command '" + tokens.front() + "': " + std::strerror(rc));
  }

  std::string log;
  char buf[4096];
  for (ssize_t n; (n = ::read(pipefd[0], buf, sizeof buf)) > 0;) log.append(buf, static_cast<std::size_t>(n));
  ::close(pipefd[0]);

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  const int exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  if (exit_code == 127) {
    throw SlicerError("slicer command '" + tokens.front() + "' not found", exit_code, log);
  }
  if (exit_code != 0) {
    throw SlicerError("slicer command '" + tokens.front() + "' exited with status " +
                          std::to_string(exit_code),
                      exit_code, log);
  }
  std::error_code ec;
  if (!std::filesystem::exists(output, ec) || std::filesystem::file_size(output, ec) == 0) {
    throw SlicerError("slicer produced no output at " + output.string(), exit_code, log);
  }
  return {output, exit_code, std::move(log)};
}

}  // namespace

SliceResult run_slicer(const SliceConfig& cfg, const std::filesystem::path& mesh_file,
                       std::filesystem::path output) {
  cfg.validate();
  if (output.empty()) output = std::filesystem::path(mesh_file).replace_extension(".gcode");
  if (cfg.mode == SlicerMode::external) return run_external(cfg, mesh_file, output);

  const auto mesh = read_stl_file(mesh_file);
  const auto text = stub_slice(mesh, cfg).serialize();
  std::ofstream out(output, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw SlicerError("cannot write gcode to " + output.string());
  return {output, 0, "stub slicer: " + std::to_string(text.size()) + " bytes"};
}

}  // namespace fingerfab
