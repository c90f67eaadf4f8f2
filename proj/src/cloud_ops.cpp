#include "dvd/cloud_ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dvd/errors.hpp"
#include "dvd/neighbor_index.hpp"
#include "dvd/rng.hpp"

namespace dvd::cloud {

PointCloud sample_mesh(const TriangleMesh& mesh, int n, std::uint64_t seed) {
  if (n < 1) throw InvalidInput("sample_mesh: n must be >= 1");
  if (mesh.faces.empty()) throw InvalidInput("sample_mesh: mesh has no faces");

  std::vector<double> cumulative(mesh.faces.size());
  std::vector<Vector3d> face_normals(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& [a, b, c] = mesh.faces[f];
    const Vector3d cross = (mesh.vertices[static_cast<std::size_t>(b)] -
                            mesh.vertices[static_cast<std::size_t>(a)])
                               .cross(mesh.vertices[static_cast<std::size_t>(c)] -
                                      mesh.vertices[static_cast<std::size_t>(a)]);
    const double norm = cross.norm();
    total += 0.5 * norm;
    cumulative[f] = total;
    face_normals[f] = norm > 0.0 ? Vector3d(cross / norm) : Vector3d::Zero();
  }
  if (total <= 0.0) throw InvalidInput("sample_mesh: mesh has no face of positive area");

  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  PointCloud out;
  out.points.reserve(static_cast<std::size_t>(n));
  out.normals.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double target = uni(rng) * total;
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), target);
    const std::size_t f = std::min<std::size_t>(
        static_cast<std::size_t>(it - cumulative.begin()), mesh.faces.size() - 1);
    const auto& [ia, ib, ic] = mesh.faces[f];
    const Vector3d& a = mesh.vertices[static_cast<std::size_t>(ia)];
    const Vector3d& b = mesh.vertices[static_cast<std::size_t>(ib)];
    const Vector3d& c = mesh.vertices[static_cast<std::size_t>(ic)];
    double u = uni(rng), v = uni(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    out.points.push_back(a + u * (b - a) + v * (c - a));
    out.normals.push_back(face_normals[f]);
  }
  return out;
}

std::tuple<PointCloud, Vector3d, double> normalize_unit_sphere(const PointCloud& cloud) {
  const Vector3d center = barycenter(cloud);
  double radius = 0.0;
  for (const auto& p : cloud.points) radius = std::max(radius, (p - center).norm());
  if (radius <= 0.0) throw InvalidInput("normalize_unit_sphere: all points coincide");
  PointCloud out = cloud;
  for (auto& p : out.points) p = (p - center) / radius;
  return {std::move(out), center, radius};
}

TriangleMesh normalize_mesh_unit_sphere(const TriangleMesh& mesh) {
  if (mesh.vertices.empty()) throw InvalidInput("normalize_mesh_unit_sphere: empty mesh");
  Vector3d center = Vector3d::Zero();
  for (const auto& v : mesh.vertices) center += v;
  center /= static_cast<double>(mesh.vertices.size());
  double radius = 0.0;
  for (const auto& v : mesh.vertices) radius = std::max(radius, (v - center).norm());
  if (radius <= 0.0) throw InvalidInput("normalize_mesh_unit_sphere: degenerate mesh");
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = (v - center) / radius;
  return out;
}

PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw InvalidInput("add_gaussian_noise: sigma must be >= 0");
  PointCloud out = cloud;
  if (sigma == 0.0) return out;
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (auto& p : out.points) {
    p.x() += gauss(rng);
    p.y() += gauss(rng);
    p.z() += gauss(rng);
  }
  return out;
}

PointCloud crop_partial(const PointCloud& cloud, double keep_fraction, std::uint64_t seed) {
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0)
    throw InvalidInput("crop_partial: keep_fraction must be in (0, 1]");
  if (cloud.empty()) throw InvalidInput("crop_partial: empty cloud");

  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector3d dir;
  do {
    dir = Vector3d(gauss(rng), gauss(rng), gauss(rng));
  } while (dir.norm() < 1e-12);
  dir.normalize();

  const std::size_t keep = static_cast<std::size_t>(
      std::ceil(keep_fraction * static_cast<double>(cloud.size())));
  std::vector<int> idx(cloud.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    const double da = cloud.points[static_cast<std::size_t>(a)].dot(dir);
    const double db = cloud.points[static_cast<std::size_t>(b)].dot(dir);
    if (da != db) return da > db;
    return a < b;
  });
  idx.resize(std::min(keep, cloud.size()));
  std::sort(idx.begin(), idx.end());  // restore original relative order
  return subset(cloud, idx);
}

PointCloud estimate_normals_pca(const PointCloud& cloud, int k) {
  if (k < 3) throw InvalidInput("estimate_normals_pca: k must be >= 3");
  if (static_cast<int>(cloud.size()) <= k)
    throw InvalidInput("estimate_normals_pca: need more points than k");

  const NeighborIndex index(cloud.points);
  const Vector3d center = barycenter(cloud);
  PointCloud out = cloud;
  out.normals.assign(cloud.size(), Vector3d::Zero());

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = index.knn(cloud.points[i], k);
    Vector3d mean = Vector3d::Zero();
    for (const auto& [j, d] : nbrs) mean += cloud.points[static_cast<std::size_t>(j)];
    mean /= static_cast<double>(nbrs.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& [j, d] : nbrs) {
      const Vector3d q = cloud.points[static_cast<std::size_t>(j)] - mean;
      cov += q * q.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    Vector3d n = eig.eigenvectors().col(0);  // eigenvalues ascending
    const double norm = n.norm();
    n = norm > 0.0 ? Vector3d(n / norm) : Vector3d(0, 0, 1);
    if (n.dot(cloud.points[i] - center) < 0.0) n = -n;
    out.normals[i] = n;
  }
  return out;
}

}  // namespace dvd::cloud
