#include "dvd/neighbor_index.hpp"

#include <algorithm>
#include <cmath>

#include "dvd/errors.hpp"

namespace dvd::cloud {

namespace {
constexpr int kLeafSize = 16;

// Max-heap order on (squared distance, index): lexicographically largest on top,
// so the heap top is always the current worst candidate under the tie rule.
struct WorseFirst {
  bool operator()(const std::pair<double, int>& a, const std::pair<double, int>& b) const {
    return a < b;
  }
};
}  // namespace

NeighborIndex::NeighborIndex(std::vector<Eigen::Vector3d> points) : points_(std::move(points)) {
  if (points_.empty()) throw InvalidInput("NeighborIndex: empty point set");
  order_.resize(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) order_[i] = static_cast<int>(i);
  nodes_.reserve(2 * points_.size() / kLeafSize + 8);
  root_ = build(0, static_cast<int>(points_.size()), 0);
}

int NeighborIndex::build(int begin, int end, int depth) {
  KdNode node;
  if (end - begin <= kLeafSize) {
    node.point_begin = begin;
    node.point_end = end;
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }

  // Split along the axis of largest extent.
  Eigen::Vector3d lo = points_[order_[begin]];
  Eigen::Vector3d hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);

  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     if (points_[a][axis] != points_[b][axis])
                       return points_[a][axis] < points_[b][axis];
                     return a < b;
                   });

  node.axis = axis;
  node.split = points_[order_[mid]][axis];
  nodes_.push_back(node);
  const int self = static_cast<int>(nodes_.size()) - 1;
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

void NeighborIndex::search(int node_id, const Eigen::Vector3d& query, int k,
                           std::vector<std::pair<double, int>>& heap) const {
  const KdNode& node = nodes_[node_id];
  if (node.axis < 0) {
    for (int i = node.point_begin; i < node.point_end; ++i) {
      const int idx = order_[i];
      const double d2 = (points_[idx] - query).squaredNorm();
      const std::pair<double, int> cand(d2, idx);
      if (static_cast<int>(heap.size()) < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), WorseFirst{});
      } else if (cand < heap.front()) {
        std::pop_heap(heap.begin(), heap.end(), WorseFirst{});
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), WorseFirst{});
      }
    }
    return;
  }

  const double delta = query[node.axis] - node.split;
  const int near = delta <= 0.0 ? node.left : node.right;
  const int far = delta <= 0.0 ? node.right : node.left;
  search(near, query, k, heap);
  // Visit the far side unless it is strictly beyond the current worst
  // candidate; at exact equality a lower-index point could still win the tie.
  if (static_cast<int>(heap.size()) < k || delta * delta <= heap.front().first) {
    search(far, query, k, heap);
  }
}

std::vector<std::pair<int, double>> NeighborIndex::knn(const Eigen::Vector3d& query,
                                                       int k) const {
  if (k < 1) throw InvalidInput("knn: k must be >= 1");
  k = std::min<int>(k, static_cast<int>(points_.size()));
  std::vector<std::pair<double, int>> heap;
  heap.reserve(static_cast<std::size_t>(k) + 1);
  search(root_, query, k, heap);
  std::sort(heap.begin(), heap.end());
  std::vector<std::pair<int, double>> out;
  out.reserve(heap.size());
  for (const auto& [d2, idx] : heap) out.emplace_back(idx, std::sqrt(d2));
  return out;
}

std::pair<int, double> NeighborIndex::nearest(const Eigen::Vector3d& query) const {
  return knn(query, 1).front();
}

}  // namespace dvd::cloud
