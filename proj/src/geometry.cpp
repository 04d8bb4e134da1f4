#include <fingerfab/geometry.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>

namespace fingerfab {

void TriangleMesh::validate() const {
  const auto n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!vertices[i].allFinite()) {
      throw GeometryError("vertex " + std::to_string(i) + " is not finite");
    }
  }
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (auto idx : triangles[t]) {
      if (idx >= n) {
        throw GeometryError("triangle " + std::to_string(t) + " references vertex " +
                            std::to_string(idx) + " of " + std::to_string(n));
      }
    }
  }
  if (!facet_normals.empty() && facet_normals.size() != triangles.size()) {
    throw GeometryError("facet normal count " + std::to_string(facet_normals.size()) +
                        " does not match triangle count " + std::to_string(triangles.size()));
  }
}

bool approx_equal(const TriangleMesh& a, const TriangleMesh& b, double tol) {
  if (a.vertices.size() != b.vertices.size() || a.triangles != b.triangles) {
    return false;
  }
  for (std::size_t i = 0; i < a.vertices.size(); ++i) {
    if ((a.vertices[i] - b.vertices[i]).cwiseAbs().maxCoeff() > tol) {
      return false;
    }
  }
  if (!a.facet_normals.empty() && !b.facet_normals.empty()) {
    if (a.facet_normals.size() != b.facet_normals.size()) {
      return false;
    }
    for (std::size_t i = 0; i < a.facet_normals.size(); ++i) {
      if ((a.facet_normals[i] - b.facet_normals[i]).cwiseAbs().maxCoeff() > tol) {
        return false;
      }
    }
  }
  return true;
}

Rotation Rotation::from_matrix(const Mat3& m) {
  if (!m.allFinite()) {
    throw GeometryError("rotation matrix has non-finite entries");
  }
  const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > kTolerance) {
    throw GeometryError("rotation matrix is not orthonormal (max |R^T R - I| = " +
                        std::to_string(ortho) + ")");
  }
  if (std::abs(m.determinant() - 1.0) > kTolerance) {
    throw GeometryError("rotation matrix has determinant " + std::to_string(m.determinant()));
  }
  return Rotation(m);
}

Rotation Rotation::about_axis_deg(int axis, double degrees) {
  const double rad = degrees * std::numbers::pi / 180.0;
  return Rotation(Eigen::AngleAxisd(rad, Vec3::Unit(axis)).toRotationMatrix());
}

Rotation Rotation::from_euler_xyz_deg(double rx, double ry, double rz) {
  return about_axis_deg(2, rz).compose(about_axis_deg(1, ry)).compose(about_axis_deg(0, rx));
}

Rotation Rotation::compose(const Rotation& inner) const { return Rotation(matrix_ * inner.matrix_); }

PlacementBox::PlacementBox(double bx, double by) : b_x(bx), b_y(by) {
  if (!(bx > 0.0) || !(by > 0.0) || std::isnan(bx) || std::isnan(by)) {
    throw GeometryError("placement box dimensions must be positive");
  }
}

const char* axis_name(Axis a) {
  switch (a) {
    case Axis::x:
      return "x";
    case Axis::y:
      return "y";
    case Axis::z:
      return "z";
  }
  return "?";
}

std::string FitVerdict::describe() const {
  if (ok()) {
    return "fits";
  }
  std::ostringstream out;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    const auto& v = violations[i];
    if (i > 0) out << "; ";
    out << "footprint exceeds box on " << axis_name(v.axis) << ": " << v.extent << " mm > "
        << v.limit << " mm";
  }
  return out.str();
}

FitError::FitError(FitVerdict verdict)
    : GeometryError(verdict.describe()), verdict_(std::move(verdict)) {}

TriangleMesh rotate_mesh(const TriangleMesh& mesh, const Rotation& r) {
  mesh.validate();
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = r.apply(v);
  for (auto& n : out.facet_normals) n = r.apply(n);
  return out;
}

TriangleMesh translate_mesh(const TriangleMesh& mesh, const Vec3& offset) {
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v += offset;
  return out;
}

Aabb bounding_box(const TriangleMesh& mesh) {
  if (mesh.vertices.empty()) {
    throw GeometryError("bounding box of an empty mesh");
  }
  Aabb box{mesh.vertices.front(), mesh.vertices.front()};
  for (const auto& v : mesh.vertices) {
    box.min = box.min.cwiseMin(v);
    box.max = box.max.cwiseMax(v);
  }
  return box;
}

FitVerdict check_fit(const Aabb& box_extent, const PlacementBox& box) {
  FitVerdict verdict;
  const Vec3 ext = box_extent.extent();
  if (!(ext.x() <= box.b_x)) verdict.violations.push_back({Axis::x, ext.x(), box.b_x});
  if (!(ext.y() <= box.b_y)) verdict.violations.push_back({Axis::y, ext.y(), box.b_y});
  return verdict;
}

TriangleMesh place_on_base(const TriangleMesh& mesh, const PlacementBox& box) {
  mesh.validate();
  if (mesh.triangles.empty()) {
    throw GeometryError("placement requires at least one triangle");
  }
  const Aabb bb = bounding_box(mesh);
  if (auto verdict = check_fit(bb, box); !verdict.ok()) {
    throw FitError(std::move(verdict));
  }
  const double x_min = bb.min.x(), x_max = bb.max.x();
  const double y_max = bb.max.y();
  const double z_min = bb.min.z();

  TriangleMesh out = mesh;
  for (auto& v : out.vertices) {
    v.x() = v.x() - (x_max - x_min) / 2 - x_min;
    v.y() = v.y() - y_max + box.b_y / 2;
    v.z() = v.z() - z_min;
  }
  return out;
}

}  // namespace fingerfab
