#pragma once

#include <Eigen/Core>

namespace coverage_inekf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

/// Tangent vector of SE_2(3), stacked as (rotation, velocity, position).
using Tangent9 = Eigen::Matrix<double, 9, 1>;

// Global tangent / error-state layout. The 15-dim error state appends
// (accel bias, gyro bias) to the 9-dim group tangent.
inline constexpr int kRotIdx = 0;
inline constexpr int kVelIdx = 3;
inline constexpr int kPosIdx = 6;
inline constexpr int kAccelBiasIdx = 9;
inline constexpr int kGyroBiasIdx = 12;
inline constexpr int kTangentDim = 9;
inline constexpr int kErrorDim = 15;

/// Below this angle (rad) the Rodrigues-type coefficients switch to Taylor series.
inline constexpr double kSmallAngle = 1e-4;

/// Compositions after which a rotation is re-orthonormalized.
inline constexpr int kRenormalizeInterval = 100;

Mat3 skew(const Vec3& w);

Mat3 exp_so3(const Vec3& phi);

/// Throws std::domain_error when the rotation angle is within 1e-6 of pi.
Vec3 log_so3(const Mat3& rot);

/// Left Jacobian of SO(3); also the first integral sum_n phi^n/(n+1)!.
Mat3 left_jacobian_so3(const Vec3& phi);

Mat3 left_jacobian_inv_so3(const Vec3& phi);

/// Second integral sum_n phi^n/(n+2)!, used for position integration.
Mat3 gamma2_so3(const Vec3& phi);

/// Nearest rotation in the Frobenius sense (polar decomposition via SVD).
Mat3 orthonormalize(const Mat3& rot);

/// Extended pose: orientation, velocity and position of the body in the world frame.
struct Se23 {
  Mat3 rot = Mat3::Identity();
  Vec3 vel = Vec3::Zero();
  Vec3 pos = Vec3::Zero();

  static Se23 identity() { return {}; }

  /// Validates the rotation block (orthonormal, det +1, within 1e-9).
  static Se23 from_matrix(const Mat5& m);

  Mat5 matrix() const;

  Se23 operator*(const Se23& other) const;

  Se23 inverse() const;

  Vec5 act(const Vec5& x) const;

  bool is_valid(double tol = 1e-9) const;

  Se23 renormalized() const { return {orthonormalize(rot), vel, pos}; }
};

Mat5 hat(const Tangent9& v);

/// Throws std::domain_error when `m` is off the se_2(3) sparsity pattern by more than 1e-12.
Tangent9 vee(const Mat5& m);

Se23 exp_se23(const Tangent9& v);

/// Throws std::domain_error when the rotation angle is within 1e-6 of pi.
Tangent9 log_se23(const Se23& x);

/// Homogeneous direction picked out by the invariant body-velocity output.
Vec5 invariant_output_direction();

/// Applies an inverse group element to `d`; for d = (0,0,0,-1,0) the result is
/// (rot^T vel, -1, 0).
Vec5 act_on_d(const Se23& x_inv, const Vec5& d);

}  // namespace coverage_inekf
