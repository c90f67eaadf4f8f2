#include "dvd/pointcloud.hpp"

#include "dvd/errors.hpp"

namespace dvd::cloud {

Vector3d barycenter(const PointCloud& cloud) {
  if (cloud.empty()) throw InvalidInput("barycenter: empty cloud");
  Vector3d sum = Vector3d::Zero();
  for (const auto& p : cloud.points) sum += p;
  return sum / static_cast<double>(cloud.size());
}

PointCloud apply(const geom3d::RigidTransform& T, const PointCloud& cloud) {
  if (cloud.empty()) throw InvalidInput("apply: empty cloud");
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(T.R * p + T.t);
  if (cloud.has_normals()) {
    out.normals.reserve(cloud.size());
    for (const auto& n : cloud.normals) out.normals.push_back(T.R * n);
  }
  return out;
}

Eigen::MatrixXd points_matrix(const PointCloud& cloud) {
  Eigen::MatrixXd m(cloud.size(), 3);
  for (std::size_t i = 0; i < cloud.size(); ++i) m.row(i) = cloud.points[i].transpose();
  return m;
}

Eigen::MatrixXd normals_matrix(const PointCloud& cloud) {
  if (!cloud.has_normals()) throw InvalidInput("normals_matrix: cloud has no normals");
  Eigen::MatrixXd m(cloud.size(), 3);
  for (std::size_t i = 0; i < cloud.size(); ++i) m.row(i) = cloud.normals[i].transpose();
  return m;
}

PointCloud subset(const PointCloud& cloud, const std::vector<int>& indices) {
  PointCloud out;
  out.points.reserve(indices.size());
  const bool with_normals = cloud.has_normals();
  if (with_normals) out.normals.reserve(indices.size());
  for (int idx : indices) {
    out.points.push_back(cloud.points.at(static_cast<std::size_t>(idx)));
    if (with_normals) out.normals.push_back(cloud.normals[static_cast<std::size_t>(idx)]);
  }
  return out;
}

}  // namespace dvd::cloud
