#include <gtest/gtest.h>

#include <cstring>

#include <fingerfab/stl.hpp>

#include "support.hpp"

using namespace fingerfab;
using fingerfab::testing::random_mesh;

namespace {

std::string as_string(const std::vector<std::byte>& b) {
  return std::string(reinterpret_cast<const char*>(b.data()), b.size());
}

}  // namespace

TEST(Stl, BinaryRoundTripAndSize) {
  std::mt19937_64 gen(1);
  for (int n : {1, 2, 17, 300}) {
    const auto m = random_mesh(gen, n);
    const auto bytes = write_stl(m, StlFormat::binary);
    EXPECT_EQ(bytes.size(), 84u + 50u * static_cast<unsigned>(n));
    const auto back = parse_stl(std::span<const std::byte>(bytes));
    EXPECT_TRUE(approx_equal(m, back, 1e-6));
  }
}

TEST(Stl, AsciiRoundTripIsExact) {
  std::mt19937_64 gen(2);
  const auto m = random_mesh(gen, 40, -1e4, 1e4);
  const auto back = parse_stl(as_string(write_stl(m, StlFormat::ascii)));
  EXPECT_TRUE(approx_equal(m, back, 0.0));
}

TEST(Stl, BinaryHeaderStartingWithSolidStillParses) {
  std::mt19937_64 gen(4);
  const auto m = random_mesh(gen, 3);
  auto bytes = write_stl(m, StlFormat::binary);
  std::memcpy(bytes.data(), "solid trick", 11);
  EXPECT_TRUE(approx_equal(m, parse_stl(std::span<const std::byte>(bytes)), 1e-6));
}

TEST(Stl, WriterComputesMissingNormals) {
  TriangleMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  m.triangles = {{0, 1, 2}};
  const auto back = parse_stl(as_string(write_stl(m, StlFormat::ascii)));
  ASSERT_EQ(back.facet_normals.size(), 1u);
  EXPECT_NEAR((back.facet_normals[0] - Vec3::UnitZ()).norm(), 0.0, 1e-12);
}

TEST(Stl, TruncatedBinaryIsRejected) {
  std::mt19937_64 gen(6);
  auto bytes = write_stl(random_mesh(gen, 4), StlFormat::binary);
  bytes.resize(bytes.size() - 10);
  EXPECT_THROW(parse_stl(std::span<const std::byte>(bytes)), StlError);
  EXPECT_THROW(parse_stl(std::span<const std::byte>(bytes.data(), 40)), StlError);
}

TEST(Stl, ZeroTriangleBinaryIsRejected) {
  std::vector<std::byte> bytes(84, std::byte{0});
  EXPECT_THROW(parse_stl(std::span<const std::byte>(bytes)), StlError);
}

TEST(Stl, AsciiErrorNamesLine) {
  const std::string bad =
      "solid x\n facet normal 0 0 1\n  outer loop\n   vertex 0 0 0\n   vertex 1 zero 0\n";
  try {
    parse_stl(bad);
    FAIL() << "expected StlError";
  } catch (const StlError& e) {
    EXPECT_NE(std::string(e.what()).find("line 5"), std::string::npos) << e.what();
  }
}

TEST(Stl, AsciiToleratesCrLfAndCase) {
  const std::string text =
      "SOLID t\r\nfacet normal 0 0 1\r\nouter loop\r\nvertex 0 0 0\r\nvertex 1 0 0\r\nvertex 0 1 0\r\n"
      "endloop\r\nendfacet\r\nendsolid t\r\n";
  const auto m = parse_stl(text);
  EXPECT_EQ(m.triangles.size(), 1u);
}

TEST(Stl, EmptyMeshCannotBeWritten) { EXPECT_THROW(write_stl(TriangleMesh{}, StlFormat::binary), StlError); }

TEST(Stl, FileRoundTrip) {
  const auto dir = fingerfab::testing::scratch_dir("stl");
  std::mt19937_64 gen(9);
  const auto m = random_mesh(gen, 12);
  write_stl_file(dir / "a.stl", m, StlFormat::binary);
  EXPECT_TRUE(approx_equal(m, read_stl_file(dir / "a.stl"), 1e-6));
  EXPECT_THROW(read_stl_file(dir / "missing.stl"), StlError);
}

TEST(Stl, SampleFingertipsParse) {
  for (const char* name : {"key_fingertip.stl", "ethernet_fingertip.stl", "battery_fingertip.stl"}) {
    const auto m = read_stl_file(fingerfab::testing::source_dir() / "data" / name);
    EXPECT_GT(m.triangles.size(), 0u) << name;
    EXPECT_NO_THROW(m.validate());
  }
}
