#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fingerfab {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Indexed triangle mesh, lengths in millimeters.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  // Either empty or one unit normal per triangle.
  std::vector<Vec3> facet_normals;

  /// Throws GeometryError on out-of-range indices, non-finite coordinates,
  /// or a normal count that does not match the triangle count.
  void validate() const;
};

/// Componentwise comparison of vertices and topology. Normals are compared
/// only when both meshes carry them.
bool approx_equal(const TriangleMesh& a, const TriangleMesh& b, double tol);

struct Aabb {
  Vec3 min;
  Vec3 max;

  Vec3 extent() const { return max - min; }
};

/// Proper rotation matrix (orthonormal, det = +1 within 1e-9).
class Rotation {
 public:
  static constexpr double kTolerance = 1e-9;

  Rotation() : matrix_(Mat3::Identity()) {}

  /// Throws GeometryError if the matrix is not a proper rotation.
  static Rotation from_matrix(const Mat3& m);

  /// Extrinsic rotations about the fixed X, then Y, then Z axes, in degrees
  /// (R = Rz * Ry * Rx).
  static Rotation from_euler_xyz_deg(double rx, double ry, double rz);

  static Rotation about_axis_deg(int axis, double degrees);

  const Mat3& matrix() const { return matrix_; }
  Vec3 apply(const Vec3& v) const { return matrix_ * v; }
  Rotation compose(const Rotation& inner) const;  // this * inner

 private:
  explicit Rotation(const Mat3& m) : matrix_(m) {}
  Mat3 matrix_;
};

/// Virtual print-area box on top of the finger base.
struct PlacementBox {
  double b_x;
  double b_y;

  PlacementBox(double bx, double by);
};

enum class Axis { x, y, z };

const char* axis_name(Axis a);

struct FitViolation {
  Axis axis;
  double extent;
  double limit;
};

struct FitVerdict {
  std::vector<FitViolation> violations;

  bool ok() const { return violations.empty(); }
  std::string describe() const;
};

class FitError : public GeometryError {
 public:
  explicit FitError(FitVerdict verdict);
  const FitVerdict& verdict() const { return verdict_; }

 private:
  FitVerdict verdict_;
};

TriangleMesh rotate_mesh(const TriangleMesh& mesh, const Rotation& r);

TriangleMesh translate_mesh(const TriangleMesh& mesh, const Vec3& offset);

/// Exact componentwise extrema over all vertices.
Aabb bounding_box(const TriangleMesh& mesh);

/// Closed inequality: a footprint exactly the box size fits.
FitVerdict check_fit(const Aabb& box_extent, const PlacementBox& box);

/// Centers the mesh on x = 0, aligns its far y edge to b_y / 2 and puts it
/// on z = 0. The mesh must already be oriented. Throws FitError when the
/// footprint does not fit the box.
TriangleMesh place_on_base(const TriangleMesh& mesh, const PlacementBox& box);

}  // namespace fingerfab
