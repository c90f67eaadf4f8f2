#include "dvd/solver.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "dvd/errors.hpp"
#include "dvd/neighbor_index.hpp"

namespace dvd::solver {

using geom3d::RigidTransform;
using geom3d::Twist;

Eigen::MatrixXd compute_jacobian(const model::Model& m, const cloud::PointCloud& Y,
                                 double step) {
  if (Y.empty()) throw InvalidInput("compute_jacobian: empty cloud");
  if (!(step > 0.0)) throw InvalidInput("compute_jacobian: step must be positive");
  const model::Descriptor base = m.encode_inference(Y);
  Eigen::MatrixXd J(base.cols(), 6);
  for (int i = 0; i < 6; ++i) {
    geom3d::Vec6 w = geom3d::Vec6::Zero();
    w[i] = -step;
    const cloud::PointCloud perturbed = cloud::apply(geom3d::exp_se3(Twist(w)), Y);
    J.col(i) = (m.encode_inference(perturbed) - base).transpose() / step;
  }
  return J;
}

Twist iclk_increment(const Eigen::MatrixXd& J, const Eigen::VectorXd& residual,
                     double damping) {
  if (J.rows() != residual.size()) throw ShapeError("iclk_increment: J rows != residual size");
  if (!J.allFinite() || !residual.allFinite())
    throw NumericError("iclk_increment: non-finite input");
  Eigen::Matrix<double, 6, 6> normal = J.transpose() * J;
  normal.diagonal().array() += damping;
  const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(normal);
  if (ldlt.info() != Eigen::Success) throw NumericError("iclk_increment: singular normal system");
  const Eigen::Matrix<double, 6, 1> dw = ldlt.solve(J.transpose() * residual);
  if (!dw.allFinite()) throw NumericError("iclk_increment: singular normal system");
  return Twist(dw);
}

RegistrationResult register_iclk(const model::Model& m, const cloud::PointCloud& X,
                                 const cloud::PointCloud& Y, const SolverConfig& cfg) {
  if (X.empty() || Y.empty()) throw InvalidInput("register_iclk: empty cloud");
  if (cfg.max_iterations < 1) throw InvalidInput("register_iclk: max_iterations must be >= 1");
  if (!(cfg.delta_threshold > 0.0)) throw InvalidInput("register_iclk: threshold must be > 0");

  RegistrationResult result;
  const model::Descriptor target = m.encode_inference(Y);
  const Eigen::MatrixXd J = compute_jacobian(m, Y, cfg.jacobian_step);
  result.jacobian_evaluations = 1;

  Eigen::Matrix<double, 6, 6> normal = J.transpose() * J;
  normal.diagonal().array() += cfg.damping;
  const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(normal);
  if (ldlt.info() != Eigen::Success)
    throw NumericError("register_iclk: singular normal system");

  RigidTransform W;
  Eigen::VectorXd residual = (m.encode_inference(X) - target).transpose();
  result.residual_history.push_back(residual.norm());

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const Eigen::Matrix<double, 6, 1> dw = ldlt.solve(J.transpose() * residual);
    if (!dw.allFinite()) throw NumericError("register_iclk: singular normal system");
    if (dw.cwiseAbs().maxCoeff() < cfg.delta_threshold) {
      result.converged = true;
      break;
    }
    W = geom3d::compose(geom3d::exp_se3(Twist(dw)), W);
    if (geom3d::orthonormality_drift(W.R) > 1e-9) W = geom3d::orthonormalized(W);
    residual = (m.encode_inference(cloud::apply(W, X)) - target).transpose();
    result.residual_history.push_back(residual.norm());
    result.iterations_used = it;
  }
  result.transform = W;
  return result;
}

RigidTransform fit_rigid(const std::vector<Eigen::Vector3d>& src,
                         const std::vector<Eigen::Vector3d>& dst) {
  if (src.size() != dst.size() || src.size() < 3)
    throw InvalidInput("fit_rigid: need >= 3 paired points");
  const double n = static_cast<double>(src.size());
  Eigen::Vector3d mu_s = Eigen::Vector3d::Zero(), mu_d = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;

  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i)
    cross += (dst[i] - mu_d) * (src[i] - mu_s).transpose();

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sigma = svd.singularValues();
  // Rank < 2 leaves a rotation degree of freedom undetermined.
  if (sigma(1) <= 1e-12 * std::max(1.0, sigma(0)))
    throw NumericError("fit_rigid: degenerate correspondences (rank-deficient cross-covariance)");

  Eigen::Matrix3d S = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) S(2, 2) = -1.0;
  RigidTransform T;
  T.R = svd.matrixU() * S * svd.matrixV().transpose();
  T.t = mu_d - T.R * mu_s;
  return T;
}

RegistrationResult register_icp(const cloud::PointCloud& X, const cloud::PointCloud& Y,
                                int max_iters, double tol) {
  if (X.size() < 3 || Y.size() < 3) throw InvalidInput("register_icp: need >= 3 points");
  if (max_iters < 1) throw InvalidInput("register_icp: max_iters must be >= 1");

  const cloud::NeighborIndex index(Y.points);
  std::vector<Eigen::Vector3d> current = X.points;
  std::vector<Eigen::Vector3d> matched(current.size());

  auto correspond = [&]() {
    double sq = 0.0;
    for (std::size_t i = 0; i < current.size(); ++i) {
      const auto [j, d] = index.nearest(current[i]);
      matched[i] = Y.points[static_cast<std::size_t>(j)];
      sq += d * d;
    }
    return sq / static_cast<double>(current.size());
  };

  RegistrationResult result;
  double mse = correspond();
  result.residual_history.push_back(std::sqrt(mse));

  RigidTransform T;
  for (int it = 1; it <= max_iters; ++it) {
    const RigidTransform step = fit_rigid(current, matched);
    T = geom3d::compose(step, T);
    if (geom3d::orthonormality_drift(T.R) > 1e-9) T = geom3d::orthonormalized(T);
    for (auto& p : current) p = step.R * p + step.t;
    const double next_mse = correspond();
    result.residual_history.push_back(std::sqrt(next_mse));
    result.iterations_used = it;
    if (mse - next_mse < tol) {
      result.converged = true;
      mse = next_mse;
      break;
    }
    mse = next_mse;
  }
  result.transform = T;
  return result;
}

}  // namespace dvd::solver
