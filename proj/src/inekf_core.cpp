#include "coverage_inekf/inekf_core.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>

#include "coverage_inekf/errors.hpp"

namespace coverage_inekf {

ProcessNoise ProcessNoise::from_densities(double accel, double gyro, double accel_bias_walk,
                                          double gyro_bias_walk) {
  ProcessNoise n;
  n.q.diagonal().segment<3>(0).setConstant(accel * accel);
  n.q.diagonal().segment<3>(3).setConstant(gyro * gyro);
  n.q.diagonal().segment<3>(6).setConstant(accel_bias_walk * accel_bias_walk);
  n.q.diagonal().segment<3>(9).setConstant(gyro_bias_walk * gyro_bias_walk);
  return n;
}

AugmentedState propagate_mean(const AugmentedState& x, const ImuSample& u, const Vec3& gravity) {
  const Vec3 phi = (u.gyro - x.bias_gyro) * u.dt;
  const Vec3 acc = u.accel - x.bias_accel;
  const Mat3& rot = x.nav.rot;
  const double dt = u.dt;

  AugmentedState out = x;
  out.nav.rot = rot * exp_so3(phi);
  out.nav.vel = x.nav.vel + gravity * dt + rot * left_jacobian_so3(phi) * acc * dt;
  out.nav.pos = x.nav.pos + x.nav.vel * dt + 0.5 * gravity * dt * dt +
                rot * gamma2_so3(phi) * acc * dt * dt;
  return out;
}

ErrorCov error_dynamics(const AugmentedState& x, const Vec3& gravity) {
  const Mat3& rot = x.nav.rot;
  ErrorCov a = ErrorCov::Zero();
  a.block<3, 3>(kRotIdx, kGyroBiasIdx) = -rot;
  a.block<3, 3>(kVelIdx, kRotIdx) = skew(gravity);
  a.block<3, 3>(kVelIdx, kAccelBiasIdx) = -rot;
  a.block<3, 3>(kVelIdx, kGyroBiasIdx) = -skew(x.nav.vel) * rot;
  a.block<3, 3>(kPosIdx, kVelIdx) = Mat3::Identity();
  a.block<3, 3>(kPosIdx, kGyroBiasIdx) = -skew(x.nav.pos) * rot;
  return a;
}

Eigen::Matrix<double, kErrorDim, 12> noise_input(const AugmentedState& x) {
  const Mat3& rot = x.nav.rot;
  Eigen::Matrix<double, kErrorDim, 12> n = Eigen::Matrix<double, kErrorDim, 12>::Zero();
  // Columns: n_a, n_g, n_ba, n_bg.
  n.block<3, 3>(kRotIdx, 3) = rot;
  n.block<3, 3>(kVelIdx, 0) = rot;
  n.block<3, 3>(kVelIdx, 3) = skew(x.nav.vel) * rot;
  n.block<3, 3>(kPosIdx, 3) = skew(x.nav.pos) * rot;
  n.block<3, 3>(kAccelBiasIdx, 6) = -Mat3::Identity();
  n.block<3, 3>(kGyroBiasIdx, 9) = -Mat3::Identity();
  return n;
}

Transition error_transition(const AugmentedState& x, const ImuSample& u, const ProcessNoise& noise,
                            const Vec3& gravity) {
  const ErrorCov adt = error_dynamics(x, gravity) * u.dt;
  const ErrorCov adt2 = adt * adt;
  const ErrorCov adt3 = adt2 * adt;
  Transition tr;
  tr.phi = ErrorCov::Identity() + adt + 0.5 * adt2 + adt3 / 6.0;
  const Eigen::Matrix<double, kErrorDim, 12> n = noise_input(x);
  const Eigen::Matrix<double, kErrorDim, 12> phi_n = tr.phi * n;
  tr.q_d = symmetrized(phi_n * noise.q * phi_n.transpose() * u.dt);
  return tr;
}

ErrorBelief propagate_cov(const ErrorBelief& bel, const ErrorCov& phi, const ErrorCov& q_d) {
  ErrorBelief out;
  out.mean = phi * bel.mean;
  out.cov = symmetrized(phi * bel.cov * phi.transpose() + q_d);
  return out;
}

AugmentedState apply_correction(const AugmentedState& x, const ErrorVec& delta) {
  AugmentedState out;
  out.nav = exp_se23(-delta.head<kTangentDim>()) * x.nav;
  out.bias_accel = x.bias_accel - delta.segment<3>(kAccelBiasIdx);
  out.bias_gyro = x.bias_gyro - delta.segment<3>(kGyroBiasIdx);
  return out;
}

Vec3 predicted_body_velocity(const AugmentedState& x) {
  return act_on_d(x.nav.inverse(), invariant_output_direction()).head<3>();
}

VelocityJacobian body_velocity_jacobian(const AugmentedState& x) {
  VelocityJacobian h = VelocityJacobian::Zero();
  h.block<3, 3>(0, kVelIdx) = -x.nav.rot.transpose();
  return h;
}

UpdatedEstimate gaussian_update(const AugmentedState& x, const ErrorBelief& bel, const Vec3& meas,
                                const Mat3& r) {
  const VelocityJacobian h = body_velocity_jacobian(x);
  const Mat3 s = symmetrized(h * bel.cov * h.transpose() + r);
  Eigen::LDLT<Mat3> ldlt(s);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-12 * ldlt.vectorD().maxCoeff()) {
    throw NumericalError("gaussian_update: innovation covariance is singular");
  }
  const Eigen::Matrix<double, kErrorDim, 3> k = ldlt.solve(h * bel.cov).transpose();

  // Measured minus predicted output, relative to the current error mean.
  const Vec3 innovation = meas - predicted_body_velocity(x) - h * bel.mean;
  const ErrorVec delta = bel.mean + k * innovation;

  const ErrorCov ikh = ErrorCov::Identity() - k * h;
  UpdatedEstimate out;
  out.state = apply_correction(x, delta);
  out.belief.mean.setZero();
  out.belief.cov = symmetrized(ikh * bel.cov * ikh.transpose() + k * r * k.transpose());
  return out;
}

}  // namespace coverage_inekf
