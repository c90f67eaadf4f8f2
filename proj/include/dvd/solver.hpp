#pragma once

#include <vector>

#include "dvd/geom3d.hpp"
#include "dvd/model.hpp"
#include "dvd/pointcloud.hpp"

namespace dvd::solver {

struct SolverConfig {
  int max_iterations = 10;
  double delta_threshold = 1e-7;  // infinity-norm stop on the twist increment
  double jacobian_step = 1e-2;    // finite-difference step per twist coordinate
  double damping = 1e-9;          // added to J'J before the solve
};

struct RegistrationResult {
  geom3d::RigidTransform transform;
  int iterations_used = 0;
  std::vector<double> residual_history;  // feature-difference norms; size iterations_used + 1
  bool converged = false;
  int jacobian_evaluations = 0;
};

/// Finite-difference warp Jacobian of the descriptor at the target: column i
/// is [psi(exp(-step*e_i) Y) - psi(Y)] / step. Computed once per registration.
Eigen::MatrixXd compute_jacobian(const model::Model& m, const cloud::PointCloud& Y, double step);

/// Solves (J'J + damping*I) dw = J' residual. Throws NumericError when the
/// damped normal system is not numerically solvable.
geom3d::Twist iclk_increment(const Eigen::MatrixXd& J, const Eigen::VectorXd& residual,
                             double damping);

/// Inverse-compositional descriptor registration: precomputes the Jacobian on
/// the target, then iterates dw from the descriptor residual and left-composes
/// exp(dw) onto the running estimate.
RegistrationResult register_iclk(const model::Model& m, const cloud::PointCloud& X,
                                 const cloud::PointCloud& Y, const SolverConfig& cfg);

/// Classic point-to-point ICP with closed-form rigid fits (cross-covariance
/// SVD with reflection correction). Stops when the mean-squared error
/// improvement drops below tol or max_iters is reached.
RegistrationResult register_icp(const cloud::PointCloud& X, const cloud::PointCloud& Y,
                                int max_iters, double tol);

/// Least-squares rigid fit mapping `src` points onto `dst` points (paired by
/// index). Throws NumericError when the cross-covariance is rank-deficient.
geom3d::RigidTransform fit_rigid(const std::vector<Eigen::Vector3d>& src,
                                 const std::vector<Eigen::Vector3d>& dst);

}  // namespace dvd::solver
