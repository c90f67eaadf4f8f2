#pragma once

#include <Eigen/Core>

#include <utility>
#include <vector>

namespace dvd::cloud {

/// Exact k-nearest-neighbor index (kd-tree) over a fixed point set.
/// Immutable after construction; safe to share across concurrent readers.
/// Ties in distance are broken toward the lower point index, results sorted
/// by nondecreasing (distance, index).
class NeighborIndex {
 public:
  explicit NeighborIndex(std::vector<Eigen::Vector3d> points);

  /// k nearest points to `query`; k is clamped to the index size.
  std::vector<std::pair<int, double>> knn(const Eigen::Vector3d& query, int k) const;

  /// Single nearest point.
  std::pair<int, double> nearest(const Eigen::Vector3d& query) const;

  std::size_t size() const { return points_.size(); }
  const std::vector<Eigen::Vector3d>& points() const { return points_; }

 private:
  struct KdNode {
    int axis = -1;          // -1 marks a leaf
    double split = 0.0;
    int point_begin = 0;    // leaf payload range into order_
    int point_end = 0;
    int left = -1;
    int right = -1;
  };

  int build(int begin, int end, int depth);
  void search(int node, const Eigen::Vector3d& query, int k,
              std::vector<std::pair<double, int>>& heap) const;

  std::vector<Eigen::Vector3d> points_;
  std::vector<int> order_;   // permutation of point indices, laid out by tree
  std::vector<KdNode> nodes_;
  int root_ = -1;
};

}  // namespace dvd::cloud
