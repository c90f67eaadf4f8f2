#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <vector>

#include "dvd/geom3d.hpp"

namespace dvd::cloud {

using Eigen::Vector3d;

/// Ordered list of 3D points with optional per-point unit normals.
struct PointCloud {
  std::vector<Vector3d> points;
  std::vector<Vector3d> normals;  // empty, or same length as points

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }
};

struct TriangleMesh {
  std::vector<Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;
};

/// Arithmetic mean of the points. Throws InvalidInput on empty cloud.
Vector3d barycenter(const PointCloud& cloud);

/// Maps every point to R*x + t; normals, when present, to R*n.
PointCloud apply(const geom3d::RigidTransform& T, const PointCloud& cloud);

/// Points as an n-by-3 row-major matrix (copy).
Eigen::MatrixXd points_matrix(const PointCloud& cloud);
Eigen::MatrixXd normals_matrix(const PointCloud& cloud);

/// Subset by index list, keeping normals when present.
PointCloud subset(const PointCloud& cloud, const std::vector<int>& indices);

}  // namespace dvd::cloud
