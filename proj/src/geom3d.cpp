#include "dvd/geom3d.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "dvd/errors.hpp"
#include "dvd/rng.hpp"

namespace dvd::geom3d {

namespace {
constexpr double kTaylorAngle = 1e-6;
constexpr double kPi = 3.14159265358979323846;
}  // namespace

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

RigidTransform exp_se3(const Twist& w) {
  const Vec3 omega = w.rot();
  const Vec3 v = w.trans();
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);

  // sin(t)/t, (1-cos(t))/t^2, (1 - sin(t)/t)/t^2 with Taylor branches.
  double a, b, c;
  if (theta < kTaylorAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
    c = (1.0 - a) / theta2;
  }

  const Mat3 K = skew(omega);
  const Mat3 K2 = K * K;
  RigidTransform T;
  T.R = Mat3::Identity() + a * K + b * K2;
  const Mat3 V = Mat3::Identity() + b * K + c * K2;
  T.t = V * v;
  return T;
}

Twist log_se3(const RigidTransform& T) {
  const double cos_theta = std::clamp((T.R.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  if (theta >= kPi - 1e-6) {
    throw NumericError("log_se3: rotation angle within 1e-6 of pi");
  }

  const double theta2 = theta * theta;
  Vec3 omega;
  {
    // omega = theta / (2 sin theta) * vee(R - R^T)
    double k;
    if (theta < kTaylorAngle) {
      k = 0.5 + theta2 / 12.0;
    } else {
      k = theta / (2.0 * std::sin(theta));
    }
    omega = k * Vec3(T.R(2, 1) - T.R(1, 2), T.R(0, 2) - T.R(2, 0), T.R(1, 0) - T.R(0, 1));
  }

  const Mat3 K = skew(omega);
  const Mat3 K2 = K * K;
  double d;  // coefficient of K^2 in V^{-1}
  if (theta < kTaylorAngle) {
    d = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / theta2;
    d = (1.0 - a / (2.0 * b)) / theta2;
  }
  const Mat3 Vinv = Mat3::Identity() - 0.5 * K + d * K2;
  return Twist(omega, Vinv * T.t);
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.R = a.R * b.R;
  out.t = a.R * b.t + a.t;
  return out;
}

RigidTransform invert(const RigidTransform& T) {
  RigidTransform out;
  out.R = T.R.transpose();
  out.t = -(out.R * T.t);
  return out;
}

Vec3 apply_point(const RigidTransform& T, const Vec3& p) { return T.R * p + T.t; }

RigidTransform orthonormalized(const RigidTransform& T) {
  Eigen::JacobiSVD<Mat3> svd(T.R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    R = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return {R, T.t};
}

double orthonormality_drift(const Mat3& R) {
  return (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
}

Mat3 rotation_from_euler_zyx_deg(const Vec3& angles_deg) {
  const double d2r = kPi / 180.0;
  const double z = angles_deg.x() * d2r;
  const double y = angles_deg.y() * d2r;
  const double x = angles_deg.z() * d2r;
  Mat3 Rz, Ry, Rx;
  Rz << std::cos(z), -std::sin(z), 0, std::sin(z), std::cos(z), 0, 0, 0, 1;
  Ry << std::cos(y), 0, std::sin(y), 0, 1, 0, -std::sin(y), 0, std::cos(y);
  Rx << 1, 0, 0, 0, std::cos(x), -std::sin(x), 0, std::sin(x), std::cos(x);
  return Rz * Ry * Rx;
}

Vec3 euler_zyx_deg(const Mat3& R) {
  const double r2d = 180.0 / kPi;
  const double sy = -std::clamp(R(2, 0), -1.0, 1.0);
  const double y = std::asin(sy);
  double z, x;
  if (std::abs(R(2, 0)) < 1.0 - 1e-12) {
    z = std::atan2(R(1, 0), R(0, 0));
    x = std::atan2(R(2, 1), R(2, 2));
  } else {
    // Gimbal lock: fold everything into z.
    z = std::atan2(-R(0, 1), R(1, 1));
    x = 0.0;
  }
  return Vec3(z * r2d, y * r2d, x * r2d);
}

std::pair<Vec3, Vec3> sample_transform_euler(std::uint64_t seed, double rot_max_deg,
                                             double trans_max) {
  auto rng = make_rng(seed);
  Vec3 angles = Vec3::Zero();
  if (rot_max_deg > 0.0) {
    std::uniform_real_distribution<double> ang(0.0, rot_max_deg);
    for (int i = 0; i < 3; ++i) angles[i] = ang(rng);
  }
  Vec3 t = Vec3::Zero();
  if (trans_max > 0.0) {
    std::uniform_real_distribution<double> tr(-trans_max, trans_max);
    for (int i = 0; i < 3; ++i) t[i] = tr(rng);
  }
  return {angles, t};
}

RigidTransform sample_transform(std::uint64_t seed, double rot_max_deg, double trans_max) {
  auto [angles, t] = sample_transform_euler(seed, rot_max_deg, trans_max);
  return {rotation_from_euler_zyx_deg(angles), t};
}

double rotation_error_deg(const Mat3& a, const Mat3& b) {
  const double arg = std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(arg) * 180.0 / kPi;
}

std::pair<double, double> euler_rmse_mae(const std::vector<Vec3>& pred_deg,
                                         const std::vector<Vec3>& gt_deg) {
  if (pred_deg.size() != gt_deg.size()) {
    throw ShapeError("euler_rmse_mae: length mismatch");
  }
  if (pred_deg.empty()) {
    throw ShapeError("euler_rmse_mae: empty input");
  }
  double sq = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < pred_deg.size(); ++i) {
    const Vec3 d = pred_deg[i] - gt_deg[i];
    sq += d.squaredNorm();
    ab += d.cwiseAbs().sum();
  }
  const double n = 3.0 * static_cast<double>(pred_deg.size());
  return {std::sqrt(sq / n), ab / n};
}

}  // namespace dvd::geom3d
