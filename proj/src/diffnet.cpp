#include "dvd/diffnet.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dvd/errors.hpp"
#include "dvd/rng.hpp"

namespace dvd::diffnet {

namespace {

void check_finite(const char* op, const Mat& v) {
  if (!v.allFinite()) throw NumericError(std::string(op) + ": produced non-finite values");
}

bool any_needs_grad(const std::vector<Node*>& parents) {
  for (const Node* p : parents)
    if (p->needs_grad) return true;
  return false;
}

void require_same_shape(const char* op, const Node* a, const Node* b) {
  if (a->value.rows() != b->value.rows() || a->value.cols() != b->value.cols())
    throw ShapeError(std::string(op) + ": shape mismatch");
}

void require_row_vector(const char* op, const Node* a) {
  if (a->value.rows() != 1) throw ShapeError(std::string(op) + ": expected a row vector");
}

}  // namespace

Value Tape::constant(Mat v) {
  check_finite("constant", v);
  Node node;
  node.grad = Mat::Zero(v.rows(), v.cols());
  node.value = std::move(v);
  node.needs_grad = false;
  nodes_.push_back(std::move(node));
  return &nodes_.back();
}

Value Tape::make(const char* op, Mat v, std::vector<Node*> parents,
                 std::function<void()> backprop) {
  check_finite(op, v);
  Node node;
  node.grad = Mat::Zero(v.rows(), v.cols());
  node.value = std::move(v);
  node.parents = std::move(parents);
  node.needs_grad = any_needs_grad(node.parents);
  node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return &nodes_.back();
}

void Tape::backward(Value loss) {
  if (loss->value.rows() != 1 || loss->value.cols() != 1)
    throw ShapeError("backward: loss must be a scalar (1x1)");

  // Tape-owned grads are per-pass scratch; only leaf grads accumulate across
  // repeated calls.
  for (auto& node : nodes_) node.grad.setZero();

  // Mark everything reachable from the loss through parent edges.
  std::vector<Node*> marked;
  std::vector<Node*> stack{loss};
  loss->visited = true;
  marked.push_back(loss);
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    for (Node* p : n->parents) {
      if (!p->visited) {
        p->visited = true;
        marked.push_back(p);
        stack.push_back(p);
      }
    }
  }

  loss->grad(0, 0) += 1.0;
  // Creation order is topological; replay it backwards exactly once.
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->visited && it->backprop) it->backprop();
  }
  for (Node* n : marked) n->visited = false;
}

// ---- primitives ------------------------------------------------------------

Value linear(Tape& t, Value x, Value W, Value b) {
  if (x->value.cols() != W->value.rows())
    throw ShapeError("linear: x columns must match W rows");
  if (b->value.rows() != 1 || b->value.cols() != W->value.cols())
    throw ShapeError("linear: bias must be (1, cols(W))");
  Mat y = x->value * W->value;
  y.rowwise() += b->value.row(0);
  Node* out = t.make("linear", std::move(y), {x, W, b}, nullptr);
  out->backprop = [x, W, b, out] {
    const Mat& g = out->grad;
    if (x->needs_grad) x->grad.noalias() += g * W->value.transpose();
    if (W->needs_grad) W->grad.noalias() += x->value.transpose() * g;
    if (b->needs_grad) b->grad.row(0) += g.colwise().sum();
  };
  return out;
}

Value relu(Tape& t, Value x) {
  Mat y = x->value.cwiseMax(0.0);
  {
    std::uint64_t bits = 0;
    const double* data = x->value.data();
    for (Eigen::Index i = 0; i < x->value.size(); ++i)
      bits = (bits << 1 | static_cast<std::uint64_t>(data[i] > 0.0)) ^ (bits >> 63);
    t.note_branch(bits);
  }
  Node* out = t.make("relu", std::move(y), {x}, nullptr);
  out->backprop = [x, out] {
    if (!x->needs_grad) return;
    x->grad.array() += (x->value.array() > 0.0).cast<double>() * out->grad.array();
  };
  return out;
}

Value max_pool_points(Tape& t, Value x) {
  const Eigen::Index n = x->value.rows(), d = x->value.cols();
  if (n < 1) throw ShapeError("max_pool_points: empty input");
  Mat y(1, d);
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    Eigen::Index best = 0;
    double best_v = x->value(0, j);
    for (Eigen::Index i = 1; i < n; ++i) {
      if (x->value(i, j) > best_v) {  // strict: ties stay at the lowest row
        best_v = x->value(i, j);
        best = i;
      }
    }
    argmax[static_cast<std::size_t>(j)] = best;
    y(0, j) = best_v;
  }
  {
    std::uint64_t bits = 0;
    for (const Eigen::Index a : argmax)
      bits = bits * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(a) + 1;
    t.note_branch(bits);
  }
  Node* out = t.make("max_pool_points", std::move(y), {x}, nullptr);
  out->backprop = [x, out, argmax = std::move(argmax)] {
    if (!x->needs_grad) return;
    for (Eigen::Index j = 0; j < out->grad.cols(); ++j)
      x->grad(argmax[static_cast<std::size_t>(j)], j) += out->grad(0, j);
  };
  return out;
}

Value concat(Tape& t, Value a, Value b) {
  require_row_vector("concat", a);
  require_row_vector("concat", b);
  const Eigen::Index p = a->value.cols(), q = b->value.cols();
  Mat y(1, p + q);
  y.leftCols(p) = a->value;
  y.rightCols(q) = b->value;
  Node* out = t.make("concat", std::move(y), {a, b}, nullptr);
  out->backprop = [a, b, p, q, out] {
    if (a->needs_grad) a->grad += out->grad.leftCols(p);
    if (b->needs_grad) b->grad += out->grad.rightCols(q);
  };
  return out;
}

Value concat_broadcast(Tape& t, Value left, Value right) {
  require_row_vector("concat_broadcast", right);
  const Eigen::Index n = left->value.rows(), p = left->value.cols(), q = right->value.cols();
  Mat y(n, p + q);
  y.leftCols(p) = left->value;
  y.rightCols(q) = right->value.row(0).replicate(n, 1);
  Node* out = t.make("concat_broadcast", std::move(y), {left, right}, nullptr);
  out->backprop = [left, right, p, q, out] {
    if (left->needs_grad) left->grad += out->grad.leftCols(p);
    if (right->needs_grad) right->grad.row(0) += out->grad.rightCols(q).colwise().sum();
  };
  return out;
}

Value softmax(Tape& t, Value x) {
  require_row_vector("softmax", x);
  Mat y = (x->value.array() - x->value.maxCoeff()).exp();
  y /= y.sum();
  Node* out = t.make("softmax", std::move(y), {x}, nullptr);
  out->backprop = [x, out] {
    if (!x->needs_grad) return;
    const double inner = (out->grad.array() * out->value.array()).sum();
    x->grad.array() += out->value.array() * (out->grad.array() - inner);
  };
  return out;
}

Value log_shift(Tape& t, Value x, double eps) {
  if ((x->value.array() + eps <= 0.0).any())
    throw NumericError("log_shift: non-positive argument");
  Mat y = (x->value.array() + eps).log();
  Node* out = t.make("log_shift", std::move(y), {x}, nullptr);
  out->backprop = [x, out, eps] {
    if (!x->needs_grad) return;
    x->grad.array() += out->grad.array() / (x->value.array() + eps);
  };
  return out;
}

Value l2_norm(Tape& t, Value x) {
  const double norm = x->value.norm();
  Node* out = t.make("l2_norm", Mat::Constant(1, 1, norm), {x}, nullptr);
  out->backprop = [x, out, norm] {
    if (!x->needs_grad || norm <= 0.0) return;  // subgradient 0 at the origin
    x->grad += (out->grad(0, 0) / norm) * x->value;
  };
  return out;
}

Value cosine(Tape& t, Value a, Value b) {
  require_same_shape("cosine", a, b);
  const double na = a->value.norm(), nb = b->value.norm();
  if (na < 1e-12 || nb < 1e-12) throw InvalidInput("cosine: zero vector");
  const double dot = (a->value.array() * b->value.array()).sum();
  const double c = dot / (na * nb);
  Node* out = t.make("cosine", Mat::Constant(1, 1, c), {a, b}, nullptr);
  out->backprop = [a, b, out, na, nb, c] {
    const double g = out->grad(0, 0);
    if (a->needs_grad) a->grad += g * (b->value / (na * nb) - (c / (na * na)) * a->value);
    if (b->needs_grad) b->grad += g * (a->value / (na * nb) - (c / (nb * nb)) * b->value);
  };
  return out;
}

Value add(Tape& t, Value a, Value b) {
  require_same_shape("add", a, b);
  Node* out = t.make("add", a->value + b->value, {a, b}, nullptr);
  out->backprop = [a, b, out] {
    if (a->needs_grad) a->grad += out->grad;
    if (b->needs_grad) b->grad += out->grad;
  };
  return out;
}

Value sub(Tape& t, Value a, Value b) {
  require_same_shape("sub", a, b);
  Node* out = t.make("sub", a->value - b->value, {a, b}, nullptr);
  out->backprop = [a, b, out] {
    if (a->needs_grad) a->grad += out->grad;
    if (b->needs_grad) b->grad -= out->grad;
  };
  return out;
}

Value mul(Tape& t, Value a, Value b) {
  require_same_shape("mul", a, b);
  Node* out = t.make("mul", a->value.cwiseProduct(b->value), {a, b}, nullptr);
  out->backprop = [a, b, out] {
    if (a->needs_grad) a->grad.array() += out->grad.array() * b->value.array();
    if (b->needs_grad) b->grad.array() += out->grad.array() * a->value.array();
  };
  return out;
}

Value div(Tape& t, Value a, Value b) {
  require_same_shape("div", a, b);
  if ((b->value.array().abs() < 1e-300).any()) throw NumericError("div: divisor too close to 0");
  Node* out = t.make("div", a->value.cwiseQuotient(b->value), {a, b}, nullptr);
  out->backprop = [a, b, out] {
    if (a->needs_grad) a->grad.array() += out->grad.array() / b->value.array();
    if (b->needs_grad)
      b->grad.array() -= out->grad.array() * a->value.array() / b->value.array().square();
  };
  return out;
}

Value standardize_row(Tape& t, Value x, double eps) {
  require_row_vector("standardize_row", x);
  const Eigen::Index k = x->value.cols();
  if (k < 2) throw ShapeError("standardize_row: need at least 2 entries");
  const double mean = x->value.mean();
  const Eigen::RowVectorXd centered = x->value.row(0).array() - mean;
  const double var = centered.squaredNorm() / static_cast<double>(k);
  const double sigma = std::sqrt(var);
  const double denom = sigma + eps;
  Mat y = centered / denom;
  Node* out = t.make("standardize_row", std::move(y), {x}, nullptr);
  out->backprop = [x, out, centered, sigma, denom, k] {
    if (!x->needs_grad) return;
    const auto g = out->grad.row(0);
    const double g_mean = g.mean();
    // d/dx of (x - mu)/(sigma + eps); the sigma path vanishes at sigma = 0.
    const double coupling =
        sigma > 0.0
            ? (g.cwiseProduct(centered).sum()) / (static_cast<double>(k) * sigma * denom * denom)
            : 0.0;
    x->grad.row(0) += (g.array() - g_mean).matrix() / denom - coupling * centered;
  };
  return out;
}

Value affine(Tape& t, Value x, double k, double c) {
  Node* out = t.make("affine", (k * x->value.array() + c).matrix(), {x}, nullptr);
  out->backprop = [x, out, k] {
    if (x->needs_grad) x->grad += k * out->grad;
  };
  return out;
}

Value sum(Tape& t, Value x) {
  Node* out = t.make("sum", Mat::Constant(1, 1, x->value.sum()), {x}, nullptr);
  out->backprop = [x, out] {
    if (x->needs_grad) x->grad.array() += out->grad(0, 0);
  };
  return out;
}

Value rows_normalize(Tape& t, Value x) {
  const Eigen::Index n = x->value.rows();
  Eigen::VectorXd norms(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    norms[i] = x->value.row(i).norm();
    if (norms[i] < 1e-12) throw NumericError("rows_normalize: degenerate row norm");
  }
  Mat y = x->value.array().colwise() / norms.array();
  Node* out = t.make("rows_normalize", std::move(y), {x}, nullptr);
  out->backprop = [x, out, norms = std::move(norms)] {
    if (!x->needs_grad) return;
    for (Eigen::Index i = 0; i < out->value.rows(); ++i) {
      const auto u = out->value.row(i);
      const auto g = out->grad.row(i);
      x->grad.row(i) += (g - g.dot(u) * u) / norms[i];
    }
  };
  return out;
}

Value rows_dot_mean(Tape& t, Value a, const Mat& b) {
  if (a->value.rows() != b.rows() || a->value.cols() != b.cols())
    throw ShapeError("rows_dot_mean: shape mismatch");
  const double n = static_cast<double>(a->value.rows());
  const double v = (a->value.array() * b.array()).sum() / n;
  Node* out = t.make("rows_dot_mean", Mat::Constant(1, 1, v), {a}, nullptr);
  out->backprop = [a, out, b, n] {
    if (a->needs_grad) a->grad += (out->grad(0, 0) / n) * b;
  };
  return out;
}

Value chamfer_to(Tape& t, Value pts, const Mat& ref) {
  if (pts->value.cols() != 3 || ref.cols() != 3)
    throw ShapeError("chamfer_to: points must be (n,3)");
  const Eigen::Index n = pts->value.rows(), r = ref.rows();
  if (n < 1 || r < 1) throw ShapeError("chamfer_to: empty point set");

  // Full squared-distance table: |p|^2 + |q|^2 - 2 p.q
  Mat d2 = -2.0 * pts->value * ref.transpose();
  d2.colwise() += pts->value.rowwise().squaredNorm();
  d2.rowwise() += ref.rowwise().squaredNorm().transpose();

  std::vector<Eigen::Index> fwd(static_cast<std::size_t>(n)), rev(static_cast<std::size_t>(r));
  double acc_fwd = 0.0, acc_rev = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index j;
    acc_fwd += std::sqrt(std::max(0.0, d2.row(i).minCoeff(&j)));
    fwd[static_cast<std::size_t>(i)] = j;
  }
  for (Eigen::Index j = 0; j < r; ++j) {
    Eigen::Index i;
    acc_rev += std::sqrt(std::max(0.0, d2.col(j).minCoeff(&i)));
    rev[static_cast<std::size_t>(j)] = i;
  }
  const double value = acc_fwd / static_cast<double>(n) + acc_rev / static_cast<double>(r);

  {
    std::uint64_t bits = 0;
    for (const Eigen::Index a : fwd) bits = bits * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(a) + 1;
    for (const Eigen::Index a : rev) bits = bits * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(a) + 3;
    t.note_branch(bits);
  }
  Node* out = t.make("chamfer_to", Mat::Constant(1, 1, value), {pts}, nullptr);
  out->backprop = [pts, out, ref, fwd = std::move(fwd), rev = std::move(rev), n, r] {
    if (!pts->needs_grad) return;
    const double g = out->grad(0, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::RowVector3d diff =
          pts->value.row(i) - ref.row(fwd[static_cast<std::size_t>(i)]);
      const double dist = diff.norm();
      if (dist > 0.0) pts->grad.row(i) += (g / (static_cast<double>(n) * dist)) * diff;
    }
    for (Eigen::Index j = 0; j < r; ++j) {
      const Eigen::Index i = rev[static_cast<std::size_t>(j)];
      const Eigen::RowVector3d diff = pts->value.row(i) - ref.row(j);
      const double dist = diff.norm();
      if (dist > 0.0) pts->grad.row(i) += (g / (static_cast<double>(r) * dist)) * diff;
    }
  };
  return out;
}

// ---- parameters -------------------------------------------------------------

Value ParameterSet::create(const std::string& name, Mat init) {
  if (by_name_.count(name)) throw InvalidInput("ParameterSet: duplicate name " + name);
  if (!init.allFinite()) throw NumericError("ParameterSet: non-finite init for " + name);
  Node node;
  node.grad = Mat::Zero(init.rows(), init.cols());
  node.value = std::move(init);
  node.needs_grad = true;
  storage_.push_back(std::move(node));
  names_.push_back(name);
  by_name_[name] = &storage_.back();
  return &storage_.back();
}

Value ParameterSet::get(const std::string& name) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw InvalidInput("ParameterSet: unknown name " + name);
  return it->second;
}

const Node& ParameterSet::at(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw InvalidInput("ParameterSet: unknown name " + name);
  return *it->second;
}

bool ParameterSet::contains(const std::string& name) const { return by_name_.count(name) > 0; }

void ParameterSet::zero_grads() {
  for (auto& node : storage_) node.grad.setZero();
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& node : storage_) n += static_cast<std::size_t>(node.value.size());
  return n;
}

void ParameterSet::set_value(const std::string& name, const Mat& v) {
  Node* node = get(name);
  if (node->value.rows() != v.rows() || node->value.cols() != v.cols())
    throw ShapeError("ParameterSet: shape mismatch for " + name);
  node->value = v;
}

// ---- optimizer --------------------------------------------------------------

void AdamState::step(ParameterSet& params, const AdamConfig& cfg) {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
  for (const auto& name : params.names()) {
    Node* p = params.get(name);
    auto& [m, v] = moments_[name];
    if (m.size() == 0) {
      m = Mat::Zero(p->value.rows(), p->value.cols());
      v = Mat::Zero(p->value.rows(), p->value.cols());
    }
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * p->grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * p->grad.cwiseProduct(p->grad);
    const Mat m_hat = m / bc1;
    const Mat v_hat = v / bc2;
    p->value.array() -= cfg.lr * m_hat.array() / (v_hat.array().sqrt() + cfg.eps);
  }
}

void AdamState::restore(std::map<std::string, std::pair<Mat, Mat>> moments, std::int64_t step) {
  moments_ = std::move(moments);
  step_ = step;
}

Mat he_normal(int rows, int cols, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / static_cast<double>(rows)));
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = gauss(rng);
  return m;
}

}  // namespace dvd::diffnet
