#pragma once

#include <Eigen/Core>

#include "coverage_inekf/lie_se23.hpp"

namespace coverage_inekf {

using ErrorVec = Eigen::Matrix<double, kErrorDim, 1>;
using ErrorCov = Eigen::Matrix<double, kErrorDim, kErrorDim>;
using NoiseCov = Eigen::Matrix<double, 12, 12>;
using VelocityJacobian = Eigen::Matrix<double, 3, kErrorDim>;

/// Default world-frame gravity (m/s^2).
inline const Vec3 kDefaultGravity{0.0, 0.0, -9.81};

/// Navigation state on SE_2(3) plus IMU biases.
struct AugmentedState {
  Se23 nav;
  Vec3 bias_accel = Vec3::Zero();
  Vec3 bias_gyro = Vec3::Zero();
};

/// Gaussian over the right-invariant error (xi, delta_b), where the true state
/// is exp(-xi) * nav and the true bias is (estimated bias - delta_b).
struct ErrorBelief {
  ErrorVec mean = ErrorVec::Zero();
  ErrorCov cov = ErrorCov::Identity();
};

struct ImuSample {
  Vec3 accel = Vec3::Zero();  // m/s^2, body frame
  Vec3 gyro = Vec3::Zero();   // rad/s, body frame
  double dt = 0.01;           // s, in (0, 0.1]
};

/// Continuous-time noise densities, ordered (n_a, n_g, n_ba, n_bg).
struct ProcessNoise {
  NoiseCov q = NoiseCov::Zero();

  /// Diagonal Q from per-axis densities (units/sqrt(Hz)).
  static ProcessNoise from_densities(double accel, double gyro, double accel_bias_walk,
                                     double gyro_bias_walk);
};

/// Strapdown propagation of the nominal state, exact for inputs held constant over dt.
AugmentedState propagate_mean(const AugmentedState& x, const ImuSample& u,
                              const Vec3& gravity = kDefaultGravity);

/// Right-invariant error dynamics matrix A_t for the 15-dim error state.
ErrorCov error_dynamics(const AugmentedState& x, const Vec3& gravity = kDefaultGravity);

/// Noise input map N_t (15x12) of the right-invariant error dynamics.
Eigen::Matrix<double, kErrorDim, 12> noise_input(const AugmentedState& x);

struct Transition {
  ErrorCov phi;
  ErrorCov q_d;
};

/// Phi = exp(A dt) (A is nilpotent of order 4, so the cubic series is exact) and
/// Q_d = Phi N Q N^T Phi^T dt.
Transition error_transition(const AugmentedState& x, const ImuSample& u, const ProcessNoise& noise,
                            const Vec3& gravity = kDefaultGravity);

ErrorBelief propagate_cov(const ErrorBelief& bel, const ErrorCov& phi, const ErrorCov& q_d);

/// x boxplus delta: nav <- exp(-xi) * nav, biases <- biases - delta_b.
AugmentedState apply_correction(const AugmentedState& x, const ErrorVec& delta);

/// Pi X^-1 d: the body-frame velocity the state predicts.
Vec3 predicted_body_velocity(const AugmentedState& x);

/// H such that Pi X^-1 d moves by H * deltaX to first order: [0, -R^T, 0, 0, 0].
VelocityJacobian body_velocity_jacobian(const AugmentedState& x);

struct UpdatedEstimate {
  AugmentedState state;
  ErrorBelief belief;
};

/// Right-invariant EKF update with a Gaussian body-velocity measurement.
/// Throws NumericalError if the innovation covariance is singular.
UpdatedEstimate gaussian_update(const AugmentedState& x, const ErrorBelief& bel, const Vec3& meas,
                                const Mat3& r);

template <typename Derived>
typename Derived::PlainObject symmetrized(const Eigen::MatrixBase<Derived>& m) {
  return 0.5 * (m + m.transpose());
}

}  // namespace coverage_inekf
