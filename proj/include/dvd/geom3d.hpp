#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <utility>
#include <vector>

namespace dvd::geom3d {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// 6-dof twist. Entries 0..2 are the rotation part (axis-angle, radians),
/// entries 3..5 the translation part (scene units). Rotation magnitude must
/// stay below pi for the logarithm to be unique.
struct Twist {
  Vec6 w = Vec6::Zero();

  Twist() = default;
  explicit Twist(const Vec6& v) : w(v) {}
  Twist(const Vec3& rot, const Vec3& trans) {
    w.head<3>() = rot;
    w.tail<3>() = trans;
  }

  Vec3 rot() const { return w.head<3>(); }
  Vec3 trans() const { return w.tail<3>(); }
};

/// Rigid transform x -> R*x + t with R in SO(3).
struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  static RigidTransform identity() { return {}; }
};

Mat3 skew(const Vec3& v);

/// Closed-form exponential map: Rodrigues rotation plus the V-matrix
/// translation coupling. Total function; switches to a Taylor branch below
/// angle 1e-6.
RigidTransform exp_se3(const Twist& w);

/// Inverse of exp_se3. Throws NumericError when the rotation angle is within
/// 1e-6 of pi (logarithm cut).
Twist log_se3(const RigidTransform& T);

/// Matrix-product composition: result applies `b` first, then `a`.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

RigidTransform invert(const RigidTransform& T);

Vec3 apply_point(const RigidTransform& T, const Vec3& p);

/// Projects R back onto SO(3) (nearest rotation by Frobenius norm).
RigidTransform orthonormalized(const RigidTransform& T);

/// Max abs deviation of R'R from the identity; drift measure.
double orthonormality_drift(const Mat3& R);

/// Intrinsic Z-Y-X Euler angles in degrees, and its inverse.
Mat3 rotation_from_euler_zyx_deg(const Vec3& angles_deg);
Vec3 euler_zyx_deg(const Mat3& R);

/// Uniform Euler angles on [0, rot_max_deg] per axis (intrinsic Z-Y-X) and
/// uniform translations on [-trans_max, trans_max] per axis. Pure function of
/// (seed, bounds).
RigidTransform sample_transform(std::uint64_t seed, double rot_max_deg, double trans_max);

/// Same sampling, returning the raw Euler angles (deg) and translation.
std::pair<Vec3, Vec3> sample_transform_euler(std::uint64_t seed, double rot_max_deg,
                                             double trans_max);

/// Geodesic angle between two rotations, in degrees.
double rotation_error_deg(const Mat3& a, const Mat3& b);

/// Pooled RMSE and MAE over all angle components of equal-length lists of
/// Euler triples (degrees). Throws ShapeError on length mismatch or empty.
std::pair<double, double> euler_rmse_mae(const std::vector<Vec3>& pred_deg,
                                         const std::vector<Vec3>& gt_deg);

}  // namespace dvd::geom3d
