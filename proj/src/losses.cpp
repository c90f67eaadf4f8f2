#include "dvd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dvd/errors.hpp"
#include "dvd/neighbor_index.hpp"

namespace dvd::losses {

LocalRegionPair select_local_regions(const cloud::PointCloud& cloud, int n_local, double cap) {
  const int n = static_cast<int>(cloud.size());
  if (n < 2) throw InvalidInput("select_local_regions: need at least 2 points");
  if (n_local < 1) throw InvalidInput("select_local_regions: n_local must be >= 1");
  if (!(cap > 0.0)) throw InvalidInput("select_local_regions: cap must be positive");

  const Eigen::Vector3d center = cloud::barycenter(cloud);
  std::vector<double> dist(static_cast<std::size_t>(n));
  double max_dist = 0.0;
  for (int i = 0; i < n; ++i) {
    dist[static_cast<std::size_t>(i)] = (cloud.points[static_cast<std::size_t>(i)] - center).norm();
    max_dist = std::max(max_dist, dist[static_cast<std::size_t>(i)]);
  }
  if (max_dist <= 0.0) throw InvalidInput("select_local_regions: all points coincide");

  int far = 0, close = 0;
  double best_far = -1.0, best_close = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double capped = std::min(dist[static_cast<std::size_t>(i)], cap);
    if (capped > best_far) {  // strict: ties stay at the lower index
      best_far = capped;
      far = i;
    }
    if (dist[static_cast<std::size_t>(i)] < best_close) {
      best_close = dist[static_cast<std::size_t>(i)];
      close = i;
    }
  }

  const cloud::NeighborIndex index(cloud.points);
  const int k = std::min(n_local, n);
  LocalRegionPair out;
  out.anchor_far = far;
  out.anchor_close = close;
  for (const auto& [idx, d] : index.knn(cloud.points[static_cast<std::size_t>(far)], k))
    out.region1.push_back(idx);
  for (const auto& [idx, d] : index.knn(cloud.points[static_cast<std::size_t>(close)], k))
    out.region2.push_back(idx);
  return out;
}

double default_outlier_cap(const cloud::PointCloud& cloud, double scale) {
  const Eigen::Vector3d center = cloud::barycenter(cloud);
  std::vector<double> dist;
  dist.reserve(cloud.size());
  for (const auto& p : cloud.points) dist.push_back((p - center).norm());
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  const double median = dist[mid];
  return median > 0.0 ? scale * median : 1.0;
}

diffnet::Value global_alignment_loss(diffnet::Tape& t, diffnet::Value dx, diffnet::Value dy) {
  return diffnet::l2_norm(t, diffnet::sub(t, dx, dy));
}

diffnet::Value relative_alignment_loss(diffnet::Tape& t, diffnet::Value dx, diffnet::Value dy,
                                       double eps) {
  diffnet::Value diff = diffnet::l2_norm(t, diffnet::sub(t, dx, dy));
  diffnet::Value scale = diffnet::affine(
      t, diffnet::add(t, diffnet::l2_norm(t, dx), diffnet::l2_norm(t, dy)), 0.5, eps);
  return diffnet::div(t, diff, scale);
}

diffnet::Value local_consistency_loss(diffnet::Tape& t, diffnet::Value tau1,
                                      diffnet::Value tau2, double eps) {
  diffnet::Value p = diffnet::softmax(t, tau1);
  diffnet::Value q = diffnet::softmax(t, tau2);
  diffnet::Value log_p = diffnet::log_shift(t, p, eps);
  diffnet::Value log_q = diffnet::log_shift(t, q, eps);
  diffnet::Value kl_pq = diffnet::sum(t, diffnet::mul(t, p, diffnet::sub(t, log_p, log_q)));
  diffnet::Value kl_qp = diffnet::sum(t, diffnet::mul(t, q, diffnet::sub(t, log_q, log_p)));
  return diffnet::affine(t, diffnet::add(t, kl_pq, kl_qp), 0.5, 0.0);
}

double chamfer(const cloud::PointCloud& a, const cloud::PointCloud& b) {
  if (a.empty() || b.empty()) throw InvalidInput("chamfer: empty cloud");
  const cloud::NeighborIndex index_b(b.points);
  const cloud::NeighborIndex index_a(a.points);
  double fwd = 0.0, rev = 0.0;
  for (const auto& p : a.points) fwd += index_b.nearest(p).second;
  for (const auto& q : b.points) rev += index_a.nearest(q).second;
  return fwd / static_cast<double>(a.size()) + rev / static_cast<double>(b.size());
}

diffnet::Value reconstruction_loss(diffnet::Tape& t, model::Model& m,
                                   const cloud::PointCloud& X, const cloud::PointCloud& Y) {
  const Eigen::MatrixXd xm = cloud::points_matrix(X);
  const Eigen::MatrixXd ym = cloud::points_matrix(Y);
  diffnet::Value cd_x = diffnet::chamfer_to(t, m.decode(t, m.encode(t, xm)), xm);
  diffnet::Value cd_y = diffnet::chamfer_to(t, m.decode(t, m.encode(t, ym)), ym);
  return diffnet::add(t, cd_x, cd_y);
}

diffnet::Value normal_loss(diffnet::Tape& t, model::Model& m, const cloud::PointCloud& X,
                           const cloud::PointCloud& Y) {
  if (!X.has_normals() || !Y.has_normals())
    throw InvalidInput("normal_loss: both clouds need ground-truth normals");
  auto per_cloud = [&](const cloud::PointCloud& P) {
    const Eigen::MatrixXd pts = cloud::points_matrix(P);
    diffnet::Value pred = m.normal_head(t, pts, m.encode(t, pts));
    diffnet::Value mean_cos = diffnet::rows_dot_mean(t, pred, cloud::normals_matrix(P));
    return diffnet::affine(t, mean_cos, -1.0, 1.0);  // 1 - mean cos
  };
  return diffnet::add(t, per_cloud(X), per_cloud(Y));
}

TotalLoss total_loss(diffnet::Tape& t, diffnet::Value primary, diffnet::Value chamfer_term,
                     diffnet::Value normal_term, double lambda1, double lambda2) {
  diffnet::Value total =
      diffnet::add(t, primary,
                   diffnet::add(t, diffnet::affine(t, chamfer_term, lambda1, 0.0),
                                diffnet::affine(t, normal_term, lambda2, 0.0)));
  TotalLoss out;
  out.value = total;
  out.breakdown = {total->value(0, 0),       primary->value(0, 0), chamfer_term->value(0, 0),
                   normal_term->value(0, 0), lambda1,              lambda2};
  return out;
}

}  // namespace dvd::losses
