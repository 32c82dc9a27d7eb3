#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <cmath>
#include <stdexcept>

#include "coverage_inekf/lie_se23.hpp"
#include "test_support.hpp"

using namespace coverage_inekf;
using coverage_inekf::testing::Gen;
using coverage_inekf::testing::series_exp;

namespace {

// sum_n A^n / (n + offset)!
Mat3 shifted_series(const Vec3& phi, int offset) {
  const Mat3 a = skew(phi);
  Mat3 out = Mat3::Zero();
  Mat3 power = Mat3::Identity();
  double fact = 1.0;
  for (int i = 1; i <= offset; ++i) fact *= i;
  for (int n = 0; n < 40; ++n) {
    out += power / fact;
    power = power * a;
    fact *= n + 1 + offset;
  }
  return out;
}

}  // namespace

TEST(Skew, MatchesCrossProduct) {
  Gen g(1);
  for (int i = 0; i < 50; ++i) {
    const Vec3 a = g.vec3(), b = g.vec3();
    EXPECT_LT((skew(a) * b - a.cross(b)).norm(), 1e-14);
  }
}

TEST(So3, ExpMatchesSeries) {
  Gen g(2);
  for (int i = 0; i < 100; ++i) {
    const Vec3 phi = g.vec3().normalized() * g.uniform(0.0, 3.0);
    EXPECT_LT((exp_so3(phi) - series_exp(Mat3(skew(phi)))).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(So3, SmallAngleBranchIsContinuous) {
  const Vec3 axis = Vec3(0.3, -0.5, 0.8).normalized();
  for (double angle : {1e-3, 2e-4, 1.0001e-4, 0.9999e-4, 5e-5, 1e-8, 0.0}) {
    const Vec3 phi = axis * angle;
    const Mat3 oracle = series_exp(Mat3(skew(phi)));
    EXPECT_LT((exp_so3(phi) - oracle).cwiseAbs().maxCoeff(), 1e-12) << angle;
    EXPECT_LT((left_jacobian_so3(phi) - shifted_series(phi, 1)).cwiseAbs().maxCoeff(), 1e-12) << angle;
    EXPECT_LT((gamma2_so3(phi) - shifted_series(phi, 2)).cwiseAbs().maxCoeff(), 1e-12) << angle;
  }
}

TEST(So3, LogInvertsExp) {
  Gen g(3);
  for (int i = 0; i < 200; ++i) {
    const Vec3 phi = g.vec3().normalized() * g.uniform(0.0, 3.1);
    EXPECT_LT((log_so3(exp_so3(phi)) - phi).norm(), 1e-9);
  }
}

TEST(So3, LogNearPiThrows) {
  const Vec3 phi = Vec3(0.0, 0.0, 1.0) * (M_PI - 1e-8);
  EXPECT_THROW(log_so3(exp_so3(phi)), std::domain_error);
}

TEST(So3, JacobiansMatchSeries) {
  Gen g(4);
  for (int i = 0; i < 100; ++i) {
    const Vec3 phi = g.vec3().normalized() * g.uniform(0.0, 3.0);
    EXPECT_LT((left_jacobian_so3(phi) - shifted_series(phi, 1)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((gamma2_so3(phi) - shifted_series(phi, 2)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((left_jacobian_inv_so3(phi) * left_jacobian_so3(phi) - Mat3::Identity())
                  .cwiseAbs()
                  .maxCoeff(),
              1e-10);
  }
}

TEST(So3, OrthonormalizeProjectsPerturbedRotation) {
  Gen g(5);
  for (int i = 0; i < 50; ++i) {
    const Mat3 r = g.rotation();
    Mat3 noisy = r;
    for (int k = 0; k < 9; ++k) noisy(k) += 1e-6 * g.normal();
    const Mat3 q = orthonormalize(noisy);
    EXPECT_LT((q * q.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(q.determinant(), 1.0, 1e-14);
    EXPECT_LT((q - r).norm(), 1e-5);
  }
}

TEST(Se23, GroupOperationsMatchDenseMatrices) {
  Gen g(6);
  for (int i = 0; i < 50; ++i) {
    const Se23 a = g.se23(), b = g.se23();
    EXPECT_LT(((a * b).matrix() - a.matrix() * b.matrix()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((a.inverse().matrix() - a.matrix().inverse()).cwiseAbs().maxCoeff(), 1e-12);
    Vec5 x;
    for (int k = 0; k < 5; ++k) x(k) = g.normal();
    EXPECT_LT((a.act(x) - a.matrix() * x).norm(), 1e-12);
  }
}

TEST(Se23, ExpMatchesSeries) {
  Gen g(7);
  for (int i = 0; i < 100; ++i) {
    const Tangent9 v = g.tangent(3.0);
    const Mat5 oracle = series_exp(Mat5(hat(v)));
    EXPECT_LT((exp_se23(v).matrix() - oracle).cwiseAbs().maxCoeff(), 1e-11);
  }
}

TEST(Se23, ExpLogRoundTrip) {
  Gen g(8);
  for (int i = 0; i < 500; ++i) {
    const Tangent9 v = g.tangent(3.1, 3.0);
    EXPECT_LT((log_se23(exp_se23(v)) - v).norm(), 1e-9);
    const Se23 x = g.se23();
    EXPECT_LT((exp_se23(log_se23(x)).matrix() - x.matrix()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Se23, HatVeeRoundTrip) {
  Gen g(9);
  const Tangent9 v = g.tangent(1.0);
  EXPECT_EQ(vee(hat(v)), v);
  Mat5 bad = hat(v);
  bad(4, 0) = 1e-3;
  EXPECT_THROW(vee(bad), std::domain_error);
}

TEST(Se23, FromMatrixRejectsNonRotation) {
  Mat5 m = Mat5::Identity();
  m(0, 0) = 1.1;
  EXPECT_THROW(Se23::from_matrix(m), std::domain_error);
  Gen g(10);
  const Se23 x = g.se23();
  EXPECT_EQ(Se23::from_matrix(x.matrix()).matrix(), x.matrix());
}

TEST(Se23, InverseActionOnOutputDirectionGivesBodyVelocity) {
  Gen g(11);
  for (int i = 0; i < 20; ++i) {
    const Se23 x = g.se23();
    const Vec5 y = act_on_d(x.inverse(), invariant_output_direction());
    EXPECT_LT((y.head<3>() - x.rot.transpose() * x.vel).norm(), 1e-12);
    EXPECT_NEAR(y(3), -1.0, 1e-15);
    EXPECT_NEAR(y(4), 0.0, 1e-15);
  }
}
