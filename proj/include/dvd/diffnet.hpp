#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace dvd::diffnet {

using Mat = Eigen::MatrixXd;

/// One node of the computation graph: a 2-D real array (scalars are 1x1,
/// vectors 1xN) plus a same-shape gradient buffer. Non-finite results are
/// rejected at creation.
struct Node {
  Mat value;
  Mat grad;                          // zero until backward accumulates into it
  std::vector<Node*> parents;
  std::function<void()> backprop;    // empty for leaves
  bool needs_grad = false;
  bool visited = false;              // scratch flag owned by Tape::backward
};

using Value = Node*;

/// Records one forward pass. Creation order is a topological order of the
/// graph; backward replays it once in reverse. Single-threaded during a
/// forward/backward pass; distinct tapes over read-only parameters may run
/// concurrently.
class Tape {
 public:
  /// Constant input (no gradient is propagated into it).
  Value constant(Mat v);

  /// Internal: registers an op result. `backprop` routes this node's grad to
  /// its parents; repeated backward calls without a grad reset accumulate.
  Value make(const char* op, Mat v, std::vector<Node*> parents, std::function<void()> backprop);

  /// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every reachable
  /// node, leaves included. Throws ShapeError unless `loss` is 1x1.
  void backward(Value loss);

  std::size_t node_count() const { return nodes_.size(); }

  /// Ops with piecewise behavior (ReLU signs, argmax rows, nearest-neighbor
  /// assignments) mix their branch choices in here. Two forward passes of the
  /// same graph with equal signatures lie in the same smooth piece, which is
  /// what makes a finite-difference gradient probe valid.
  void note_branch(std::uint64_t bits) {
    branch_signature_ = (branch_signature_ ^ bits) * 0x100000001B3ULL;
  }
  std::uint64_t branch_signature() const { return branch_signature_; }

 private:
  std::deque<Node> nodes_;
  std::uint64_t branch_signature_ = 0xCBF29CE484222325ULL;
};

// ---- primitives ----------------------------------------------------------

/// x:(n,a) * W:(a,b) + b:(1,b) broadcast over rows.
Value linear(Tape& t, Value x, Value W, Value b);
Value relu(Tape& t, Value x);
/// Columnwise max over the point (row) dimension: (n,d) -> (1,d). The
/// subgradient goes to the lowest argmax row on ties.
Value max_pool_points(Tape& t, Value x);
/// Row-vector concatenation: (1,p) ++ (1,q) -> (1,p+q).
Value concat(Tape& t, Value a, Value b);
/// Per-row concatenation of a matrix with a broadcast row vector:
/// (n,p) ++ (1,q) -> (n,p+q).
Value concat_broadcast(Tape& t, Value left, Value right);
Value softmax(Tape& t, Value x);                    // (1,d) -> (1,d)
Value log_shift(Tape& t, Value x, double eps = 0);  // elementwise log(x+eps)
Value l2_norm(Tape& t, Value x);                    // -> (1,1)
Value cosine(Tape& t, Value a, Value b);            // -> (1,1); rejects zero vectors
Value add(Tape& t, Value a, Value b);
Value sub(Tape& t, Value a, Value b);
Value mul(Tape& t, Value a, Value b);               // elementwise
Value div(Tape& t, Value a, Value b);               // elementwise; |b| >= 1e-300
Value affine(Tape& t, Value x, double k, double c); // k*x + c elementwise
Value sum(Tape& t, Value x);                        // -> (1,1)
/// (x - mean(x)) / (std(x) + eps) over a row vector's entries.
Value standardize_row(Tape& t, Value x, double eps = 1e-6);
/// Rowwise normalization to unit vectors; rejects rows with norm < 1e-12.
Value rows_normalize(Tape& t, Value x);
/// (1/n) * sum_i dot(a_i, b_i) against a constant matrix: -> (1,1).
Value rows_dot_mean(Tape& t, Value a, const Mat& b);
/// Symmetric mean nearest-neighbor distance (plain norms) between variable
/// points (n,3) and a constant reference (r,3): -> (1,1). Nearest-neighbor
/// assignments are fixed at forward time.
Value chamfer_to(Tape& t, Value pts, const Mat& ref);

// ---- parameters ----------------------------------------------------------

/// Named trainable leaves with stable (insertion) iteration order. Gradient
/// buffers are always allocated; zero_grads() resets them between steps.
class ParameterSet {
 public:
  Value create(const std::string& name, Mat init);
  Value get(const std::string& name);
  const Node& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  void zero_grads();
  std::size_t scalar_count() const;

  /// Copies values in; shapes must match. Unknown names throw ShapeError.
  void set_value(const std::string& name, const Mat& v);

 private:
  std::deque<Node> storage_;
  std::vector<std::string> names_;
  std::map<std::string, Node*> by_name_;
};

// ---- optimizer ------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second-moment state with bias correction; deterministic.
class AdamState {
 public:
  void step(ParameterSet& params, const AdamConfig& cfg);
  std::int64_t step_count() const { return step_; }

  // Exposed for checkpointing.
  const std::map<std::string, std::pair<Mat, Mat>>& moments() const { return moments_; }
  void restore(std::map<std::string, std::pair<Mat, Mat>> moments, std::int64_t step);

 private:
  std::map<std::string, std::pair<Mat, Mat>> moments_;  // name -> (m, v)
  std::int64_t step_ = 0;
};

/// He-normal init (std = sqrt(2/fan_in)) for ReLU stacks.
Mat he_normal(int rows, int cols, std::uint64_t seed);

}  // namespace dvd::diffnet
