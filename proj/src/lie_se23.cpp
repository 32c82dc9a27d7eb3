#include "coverage_inekf/lie_se23.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace coverage_inekf {

namespace {

// Coefficients of exp(phi^) = I + a*phi^ + b*phi^2 and of the series integrals.
// a = sin(t)/t, b = (1-cos t)/t^2, c = (t - sin t)/t^3, d = (t^2/2 + cos t - 1)/t^4.
struct SeriesCoeffs {
  double a;
  double b;
  double c;
};

SeriesCoeffs series_coeffs(double theta) {
  const double t2 = theta * theta;
  if (theta < kSmallAngle) {
    const double t4 = t2 * t2;
    return {1.0 - t2 / 6.0 + t4 / 120.0,
            0.5 - t2 / 24.0 + t4 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0};
  }
  const double s = std::sin(theta);
  const double co = std::cos(theta);
  return {s / theta, (1.0 - co) / t2, (theta - s) / (t2 * theta)};
}

Vec3 vee_so3(const Mat3& m) {
  return {m(2, 1), m(0, 2), m(1, 0)};
}

}  // namespace

Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

Mat3 exp_so3(const Vec3& phi) {
  const SeriesCoeffs k = series_coeffs(phi.norm());
  const Mat3 w = skew(phi);
  return Mat3::Identity() + k.a * w + k.b * w * w;
}

Vec3 log_so3(const Mat3& rot) {
  const Vec3 axis2 = vee_so3(rot - rot.transpose());
  const double s = 0.5 * axis2.norm();
  const double c = 0.5 * (rot.trace() - 1.0);
  const double theta = std::atan2(s, c);
  if (theta > std::numbers::pi - 1e-6) {
    throw std::domain_error("log_so3: rotation angle too close to pi");
  }
  double factor;
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    factor = 0.5 * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0);
  } else {
    factor = theta / (2.0 * s);
  }
  return factor * axis2;
}

Mat3 left_jacobian_so3(const Vec3& phi) {
  const SeriesCoeffs k = series_coeffs(phi.norm());
  const Mat3 w = skew(phi);
  return Mat3::Identity() + k.b * w + k.c * w * w;
}

Mat3 left_jacobian_inv_so3(const Vec3& phi) {
  const double theta = phi.norm();
  const double t2 = theta * theta;
  double e;
  if (theta < kSmallAngle) {
    e = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  } else {
    e = (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) / t2;
  }
  const Mat3 w = skew(phi);
  return Mat3::Identity() - 0.5 * w + e * w * w;
}

Mat3 gamma2_so3(const Vec3& phi) {
  const double theta = phi.norm();
  const double t2 = theta * theta;
  double c;
  double d;
  // d = (t^2/2 + cos t - 1)/t^4 cancels badly well above kSmallAngle.
  if (theta < 1e-2) {
    const double t4 = t2 * t2;
    c = 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0;
    d = 1.0 / 24.0 - t2 / 720.0 + t4 / 40320.0;
  } else {
    c = (theta - std::sin(theta)) / (t2 * theta);
    d = (0.5 * t2 + std::cos(theta) - 1.0) / (t2 * t2);
  }
  const Mat3 w = skew(phi);
  return 0.5 * Mat3::Identity() + c * w + d * w * w;
}

Mat3 orthonormalize(const Mat3& rot) {
  Eigen::JacobiSVD<Mat3> svd(rot, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) {
    u.col(2) *= -1.0;
  }
  return u * v.transpose();
}

Se23 Se23::from_matrix(const Mat5& m) {
  Se23 x{m.block<3, 3>(0, 0), m.block<3, 1>(0, 3), m.block<3, 1>(0, 4)};
  if (!x.is_valid()) {
    throw std::domain_error("Se23::from_matrix: rotation block is not a proper rotation");
  }
  return x;
}

Mat5 Se23::matrix() const {
  Mat5 m = Mat5::Identity();
  m.block<3, 3>(0, 0) = rot;
  m.block<3, 1>(0, 3) = vel;
  m.block<3, 1>(0, 4) = pos;
  return m;
}

Se23 Se23::operator*(const Se23& other) const {
  return {rot * other.rot, rot * other.vel + vel, rot * other.pos + pos};
}

Se23 Se23::inverse() const {
  const Mat3 rt = rot.transpose();
  return {rt, -rt * vel, -rt * pos};
}

Vec5 Se23::act(const Vec5& x) const {
  Vec5 out;
  out.head<3>() = rot * x.head<3>() + vel * x(3) + pos * x(4);
  out(3) = x(3);
  out(4) = x(4);
  return out;
}

bool Se23::is_valid(double tol) const {
  if (!rot.allFinite() || !vel.allFinite() || !pos.allFinite()) {
    return false;
  }
  return (rot * rot.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(rot.determinant() - 1.0) <= tol;
}

Mat5 hat(const Tangent9& v) {
  Mat5 m = Mat5::Zero();
  m.block<3, 3>(0, 0) = skew(v.segment<3>(kRotIdx));
  m.block<3, 1>(0, 3) = v.segment<3>(kVelIdx);
  m.block<3, 1>(0, 4) = v.segment<3>(kPosIdx);
  return m;
}

Tangent9 vee(const Mat5& m) {
  constexpr double tol = 1e-12;
  const Mat3 w = m.block<3, 3>(0, 0);
  const bool skew_ok = (w + w.transpose()).cwiseAbs().maxCoeff() <= tol;
  const bool bottom_ok = m.block<2, 5>(3, 0).cwiseAbs().maxCoeff() <= tol;
  if (!skew_ok || !bottom_ok) {
    throw std::domain_error("vee: matrix is not in se_2(3)");
  }
  Tangent9 v;
  v.segment<3>(kRotIdx) = vee_so3(w);
  v.segment<3>(kVelIdx) = m.block<3, 1>(0, 3);
  v.segment<3>(kPosIdx) = m.block<3, 1>(0, 4);
  return v;
}

Se23 exp_se23(const Tangent9& v) {
  const Vec3 phi = v.segment<3>(kRotIdx);
  const Mat3 jl = left_jacobian_so3(phi);
  return {exp_so3(phi), jl * v.segment<3>(kVelIdx), jl * v.segment<3>(kPosIdx)};
}

Tangent9 log_se23(const Se23& x) {
  const Vec3 phi = log_so3(x.rot);
  const Mat3 jl_inv = left_jacobian_inv_so3(phi);
  Tangent9 v;
  v.segment<3>(kRotIdx) = phi;
  v.segment<3>(kVelIdx) = jl_inv * x.vel;
  v.segment<3>(kPosIdx) = jl_inv * x.pos;
  return v;
}

Vec5 invariant_output_direction() {
  Vec5 d;
  d << 0.0, 0.0, 0.0, -1.0, 0.0;
  return d;
}

Vec5 act_on_d(const Se23& x_inv, const Vec5& d) {
  return x_inv.act(d);
}

}  // namespace coverage_inekf
