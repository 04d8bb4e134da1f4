#include <fingerfab/stl.hpp>

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>

#include <Eigen/Geometry>

namespace fingerfab {
namespace {

static_assert(std::endian::native == std::endian::little, "STL I/O assumes a little-endian host");

constexpr std::size_t kHeaderSize = 80;
constexpr std::size_t kRecordSize = 50;

// Keywords are lower case; exporters vary on case.
bool keyword_is(std::string_view tok, std::string_view keyword) {
  if (tok.size() != keyword.size()) return false;
  for (std::size_t i = 0; i < tok.size(); ++i) {
    const char c = tok[i] >= 'A' && tok[i] <= 'Z' ? static_cast<char>(tok[i] - 'A' + 'a') : tok[i];
    if (c != keyword[i]) return false;
  }
  return true;
}

class AsciiCursor {
 public:
  explicit AsciiCursor(std::string_view text) : text_(text) {}

  std::optional<std::string_view> next() {
    skip_space();
    if (pos_ >= text_.size()) return std::nullopt;
    const auto start = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_])) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  void skip_line() {
    while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
  }

  int line() const { return line_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw StlError("ASCII STL line " + std::to_string(line_) + ": " + what);
  }

  void expect(std::string_view keyword) {
    auto tok = next();
    if (!tok) fail("expected '" + std::string(keyword) + "', got end of file");
    if (!keyword_is(*tok, keyword)) {
      fail("expected '" + std::string(keyword) + "', got '" + std::string(*tok) + "'");
    }
  }

  double number() {
    auto tok = next();
    if (!tok) fail("expected a number, got end of file");
    double value = 0.0;
    const char* first = tok->data();
    const char* last = first + tok->size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) fail("malformed number '" + std::string(*tok) + "'");
    return value;
  }

  Vec3 vec3() {
    const double x = number();
    const double y = number();
    const double z = number();
    return {x, y, z};
  }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

TriangleMesh parse_ascii(std::string_view text) {
  AsciiCursor cur(text);
  cur.expect("solid");
  cur.skip_line();

  TriangleMesh mesh;
  while (true) {
    auto tok = cur.next();
    if (!tok) cur.fail("missing 'endsolid'");
    if (keyword_is(*tok, "endsolid")) break;
    if (!keyword_is(*tok, "facet")) cur.fail("expected 'facet' or 'endsolid', got '" + std::string(*tok) + "'");
    cur.expect("normal");
    mesh.facet_normals.push_back(cur.vec3());
    cur.expect("outer");
    cur.expect("loop");
    const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
    for (int k = 0; k < 3; ++k) {
      cur.expect("vertex");
      mesh.vertices.push_back(cur.vec3());
    }
    cur.expect("endloop");
    cur.expect("endfacet");
    mesh.triangles.push_back({base, base + 1, base + 2});
  }
  if (mesh.triangles.empty()) {
    throw StlError("ASCII STL contains no facets");
  }
  return mesh;
}

float read_f32(const unsigned char* p) {
  float f;
  std::memcpy(&f, p, sizeof f);
  return f;
}

TriangleMesh parse_binary(std::span<const unsigned char> data) {
  if (data.size() < kHeaderSize + 4) {
    throw StlError("binary STL truncated: " + std::to_string(data.size()) +
                   " bytes is shorter than the 84-byte header");
  }
  std::uint32_t count;
  std::memcpy(&count, data.data() + kHeaderSize, sizeof count);
  if (count == 0) {
    throw StlError("binary STL declares 0 triangles");
  }
  const std::size_t needed = kHeaderSize + 4 + kRecordSize * static_cast<std::size_t>(count);
  if (data.size() < needed) {
    throw StlError("binary STL truncated: " + std::to_string(count) + " triangles need " +
                   std::to_string(needed) + " bytes, got " + std::to_string(data.size()));
  }

  TriangleMesh mesh;
  mesh.vertices.reserve(3 * static_cast<std::size_t>(count));
  mesh.triangles.reserve(count);
  mesh.facet_normals.reserve(count);
  const unsigned char* rec = data.data() + kHeaderSize + 4;
  for (std::uint32_t t = 0; t < count; ++t, rec += kRecordSize) {
    auto vec_at = [&](int slot) {
      const unsigned char* p = rec + 12 * slot;
      return Vec3(read_f32(p), read_f32(p + 4), read_f32(p + 8));
    };
    mesh.facet_normals.push_back(vec_at(0));
    const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
    for (int k = 1; k <= 3; ++k) mesh.vertices.push_back(vec_at(k));
    mesh.triangles.push_back({base, base + 1, base + 2});
  }
  return mesh;
}

bool binary_size_consistent(std::span<const unsigned char> data) {
  if (data.size() < kHeaderSize + 4) return false;
  std::uint32_t count;
  std::memcpy(&count, data.data() + kHeaderSize, sizeof count);
  return count > 0 && data.size() >= kHeaderSize + 4 + kRecordSize * static_cast<std::size_t>(count);
}

Vec3 facet_normal(const TriangleMesh& mesh, std::size_t t) {
  if (!mesh.facet_normals.empty()) return mesh.facet_normals[t];
  const auto& tri = mesh.triangles[t];
  const Vec3 n = (mesh.vertices[tri[1]] - mesh.vertices[tri[0]])
                     .cross(mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
  const double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

void append_number(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

void append_vec(std::string& out, const Vec3& v) {
  for (int i = 0; i < 3; ++i) {
    out += ' ';
    append_number(out, v[i]);
  }
}

void put_f32(std::vector<std::byte>& out, double v) {
  const auto f = static_cast<float>(v);
  std::byte raw[4];
  std::memcpy(raw, &f, 4);
  out.insert(out.end(), raw, raw + 4);
}

}  // namespace

TriangleMesh parse_stl(std::span<const std::byte> bytes) {
  const std::span<const unsigned char> data(reinterpret_cast<const unsigned char*>(bytes.data()),
                                            bytes.size());
  const std::string_view text(reinterpret_cast<const char*>(data.data()), data.size());

  std::size_t lead = 0;
  while (lead < text.size() && (text[lead] == ' ' || text[lead] == '\t' || text[lead] == '\r' ||
                                text[lead] == '\n')) {
    ++lead;
  }
  if (keyword_is(text.substr(lead, 5), "solid")) {
    try {
      return parse_ascii(text);
    } catch (const StlError&) {
      if (!binary_size_consistent(data)) throw;
    }
  }
  return parse_binary(data);
}

TriangleMesh parse_stl(std::string_view bytes) {
  return parse_stl(std::as_bytes(std::span<const char>(bytes.data(), bytes.size())));
}

std::vector<std::byte> write_stl(const TriangleMesh& mesh, StlFormat format) {
  mesh.validate();
  if (mesh.triangles.empty()) {
    throw StlError("cannot write an STL with 0 triangles");
  }
  const auto n = mesh.triangles.size();

  if (format == StlFormat::ascii) {
    std::string out = "solid fingerfab\n";
    for (std::size_t t = 0; t < n; ++t) {
      out += "  facet normal";
      append_vec(out, facet_normal(mesh, t));
      out += "\n    outer loop\n";
      for (auto idx : mesh.triangles[t]) {
        out += "      vertex";
        append_vec(out, mesh.vertices[idx]);
        out += '\n';
      }
      out += "    endloop\n  endfacet\n";
    }
    out += "endsolid fingerfab\n";
    const auto* p = reinterpret_cast<const std::byte*>(out.data());
    return {p, p + out.size()};
  }

  std::vector<std::byte> out;
  out.reserve(kHeaderSize + 4 + kRecordSize * n);
  // Header must not start with "solid" or readers take it for ASCII.
  std::string header = "binary STL written by fingerfab";
  header.resize(kHeaderSize, ' ');
  for (char c : header) out.push_back(static_cast<std::byte>(c));
  const auto count = static_cast<std::uint32_t>(n);
  std::byte raw[4];
  std::memcpy(raw, &count, 4);
  out.insert(out.end(), raw, raw + 4);
  for (std::size_t t = 0; t < n; ++t) {
    const Vec3 normal = facet_normal(mesh, t);
    for (int i = 0; i < 3; ++i) put_f32(out, normal[i]);
    for (auto idx : mesh.triangles[t]) {
      for (int i = 0; i < 3; ++i) put_f32(out, mesh.vertices[idx][i]);
    }
    out.push_back(std::byte{0});
    out.push_back(std::byte{0});
  }
  return out;
}

TriangleMesh read_stl_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw StlError("cannot open STL file " + path.string());
  }
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_stl(std::string_view(data));
}

void write_stl_file(const std::filesystem::path& path, const TriangleMesh& mesh, StlFormat format) {
  const auto bytes = write_stl(mesh, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw StlError("cannot write STL file " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw StlError("short write to " + path.string());
  }
}

}  // namespace fingerfab
