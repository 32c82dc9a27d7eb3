#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "coverage_inekf/errors.hpp"
#include "coverage_inekf/tmvn.hpp"
#include "test_support.hpp"

using namespace coverage_inekf;
using coverage_inekf::testing::Gen;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double phi_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct Truncated1d {
  double prob, mean, var;
};

// Closed-form moments of N(mu, s^2) restricted to [a, b].
Truncated1d truncated_normal(double mu, double s, double a, double b) {
  const double al = (a - mu) / s, be = (b - mu) / s;
  const double z = phi_cdf(be) - phi_cdf(al);
  const double pa = std::isfinite(al) ? phi_pdf(al) : 0.0;
  const double pb = std::isfinite(be) ? phi_pdf(be) : 0.0;
  const double ta = std::isfinite(al) ? al * pa : 0.0;
  const double tb = std::isfinite(be) ? be * pb : 0.0;
  const double m = (pa - pb) / z;
  return {z, mu + s * m, s * s * (1.0 + (ta - tb) / z - m * m)};
}

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }
Eigen::MatrixXd m1(double x) { return Eigen::MatrixXd::Constant(1, 1, x); }

BoxRegion box1(double a, double b) { return {v1(a), v1(b)}; }

}  // namespace

TEST(NormalCdf, MatchesErfcClosedForm) {
  for (double x = -8.0; x <= 8.0; x += 0.01) {
    EXPECT_NEAR(normal_cdf(x), phi_cdf(x), 1e-15);
  }
}

TEST(NormalQuantile, InvertsCdf) {
  for (double p : {1e-12, 1e-6, 0.01, 0.2, 0.5, 0.8, 0.99, 1 - 1e-9}) {
    EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-12 * std::max(1.0, p / (1 - p)));
  }
}

TEST(BoxRegion, ContainsIsInclusive) {
  BoxRegion b{Eigen::Vector2d(-1, 0), Eigen::Vector2d(1, kInf)};
  EXPECT_TRUE(b.contains(Eigen::Vector2d(-1, 0)));
  EXPECT_TRUE(b.contains(Eigen::Vector2d(1, 1e300)));
  EXPECT_FALSE(b.contains(Eigen::Vector2d(1.0001, 1)));
  EXPECT_TRUE(BoxRegion::unbounded(3).contains(Eigen::Vector3d(1e10, -1e10, 0)));
}

TEST(BoxMoments, OneDimensionalMatchesClosedForm) {
  Gen g(31);
  for (int i = 0; i < 100; ++i) {
    const double mu = g.normal(), s = g.uniform(0.2, 2.0);
    const double c = mu + g.uniform(-1.5, 1.5) * s, w = g.uniform(0.2, 2.5) * s;
    const Truncated1d ref = truncated_normal(mu, s, c - w, c + w);
    // One conditioning step: the mass is exact, the moments come from the lattice.
    const TruncatedMoments coarse = box_moments(v1(mu), m1(s * s), box1(c - w, c + w), 1000, 7);
    EXPECT_NEAR(coarse.prob, ref.prob, 1e-12);
    EXPECT_NEAR(coarse.mean(0), ref.mean, 1e-2 * s);
    EXPECT_NEAR(coarse.second_moment(0, 0) - coarse.mean(0) * coarse.mean(0), ref.var, 2e-2 * s * s);
    const TruncatedMoments fine = box_moments(v1(mu), m1(s * s), box1(c - w, c + w), 100000, 7);
    EXPECT_NEAR(fine.mean(0), ref.mean, 1e-4 * s);
    EXPECT_NEAR(fine.second_moment(0, 0) - fine.mean(0) * fine.mean(0), ref.var, 2e-4 * s * s);
  }
}

TEST(BoxMoments, HalfInfiniteBoxGivesHalfNormal) {
  const double mu = 0.3, s = 1.7;
  const TruncatedMoments tm = box_moments(v1(mu), m1(s * s), box1(mu, kInf), 100000, 3);
  EXPECT_NEAR(tm.prob, 0.5, 1e-14);
  EXPECT_NEAR(tm.mean(0), mu + s * std::sqrt(2.0 / M_PI), 1e-4 * s);
  EXPECT_NEAR(tm.second_moment(0, 0) - tm.mean(0) * tm.mean(0), s * s * (1.0 - 2.0 / M_PI),
              1e-4 * s * s);
}

TEST(BoxMoments, UnboundedBoxReturnsPrior) {
  Gen g(32);
  const Eigen::VectorXd mu = g.vec(3);
  const Eigen::MatrixXd cov = g.spd(3);
  const TruncatedMoments tm = box_moments(mu, cov, BoxRegion::unbounded(3), 10000, 5);
  EXPECT_NEAR(tm.prob, 1.0, 1e-12);
  EXPECT_LT((tm.mean - mu).norm(), 2e-3);
  EXPECT_LT((tm.second_moment - cov - mu * mu.transpose()).norm(), 1e-2);
}

TEST(BoxMoments, IndependentAxesFactorize) {
  Gen g(33);
  for (int i = 0; i < 20; ++i) {
    Eigen::Vector3d mu, sd, lo, hi;
    double prob = 1.0;
    Eigen::Vector3d mean;
    for (int j = 0; j < 3; ++j) {
      mu(j) = g.normal();
      sd(j) = g.uniform(0.3, 2.0);
      lo(j) = mu(j) + g.uniform(-2.0, 0.5) * sd(j);
      hi(j) = lo(j) + g.uniform(0.5, 3.0) * sd(j);
      const Truncated1d t = truncated_normal(mu(j), sd(j), lo(j), hi(j));
      prob *= t.prob;
      mean(j) = t.mean;
    }
    const Eigen::MatrixXd cov = sd.array().square().matrix().asDiagonal();
    const TruncatedMoments tm = box_moments(mu, cov, {lo, hi}, 10000, 11);
    EXPECT_NEAR(tm.prob, prob, 1e-3 * prob + 5 * tm.prob_std_error);
    EXPECT_LT((tm.mean - mean).cwiseQuotient(sd).cwiseAbs().maxCoeff(), 5e-3);
  }
}

TEST(BoxMoments, CorrelatedMatchesRejectionOracle) {
  Gen g(34);
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd mu = g.vec(3, 0.5);
    const Eigen::MatrixXd cov = g.spd(3, 0.1);
    const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
    const Eigen::VectorXd lo = mu - sd.cwiseProduct(Eigen::Vector3d(0.5, 1.0, 1.5));
    const Eigen::VectorXd hi = mu + sd.cwiseProduct(Eigen::Vector3d(1.5, 0.7, 1.0));
    const TruncatedMoments tm = box_moments(mu, cov, {lo, hi}, 10000, 13);
    const OracleMoments ref = oracle_box_moments(mu, cov, {lo, hi}, 2'000'000, 17);
    const double ref_se = std::sqrt(ref.inside.prob * (1 - ref.inside.prob) / ref.n_samples);
    EXPECT_NEAR(tm.prob, ref.inside.prob, 5 * std::hypot(ref_se, tm.prob_std_error));
    for (int j = 0; j < 3; ++j) {
      EXPECT_NEAR(tm.mean(j), ref.inside.mean(j), 6 * ref.mean_std_error(j) + 2e-3 * sd(j));
    }
  }
}

TEST(BoxMoments, DeterministicForFixedSeed) {
  Gen g(35);
  const Eigen::VectorXd mu = g.vec(3);
  const Eigen::MatrixXd cov = g.spd(3);
  const BoxRegion box{mu.array() - 0.5, mu.array() + 1.0};
  const TruncatedMoments a = box_moments(mu, cov, box, 1000, 99);
  const TruncatedMoments b = box_moments(mu, cov, box, 1000, 99);
  const TruncatedMoments c = box_moments(mu, cov, box, 1000, 100);
  EXPECT_EQ(a.prob, b.prob);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.second_moment, b.second_moment);
  EXPECT_NE(a.prob, c.prob);
}

TEST(BoxMoments, ProbabilityOnlyVariantAgrees) {
  Gen g(36);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd mu = g.vec(3);
    const Eigen::MatrixXd cov = g.spd(3);
    const BoxRegion box{mu.array() - 0.7, mu.array() + 0.4};
    const TruncatedMoments tm = box_moments(mu, cov, box, {5000, 10}, 3);
    const BoxProbability bp = box_probability(mu, cov, box, {5000, 10}, 4);
    EXPECT_NEAR(tm.prob, bp.prob, 5 * std::hypot(tm.prob_std_error, bp.std_error) + 1e-12);
  }
}

TEST(BoxMoments, MassIsMonotoneInTheBox) {
  Gen g(37);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd mu = g.vec(3);
    const Eigen::MatrixXd cov = g.spd(3);
    const Eigen::VectorXd lo = mu - g.vec(3, 0.5).cwiseAbs();
    const Eigen::VectorXd hi = mu + g.vec(3, 0.5).cwiseAbs();
    const Eigen::VectorXd grow = g.vec(3, 0.3).cwiseAbs();
    const BoxRegion small{lo, hi}, big{lo - grow, hi + grow};
    // The rejection oracle with common random numbers is exactly monotone.
    const OracleMoments os = oracle_box_moments(mu, cov, small, 20000, 5);
    const OracleMoments ob = oracle_box_moments(mu, cov, big, 20000, 5);
    EXPECT_LE(os.n_accepted, ob.n_accepted);
    // The lattice estimator is monotone up to its sampling error.
    const TruncatedMoments ts = box_moments(mu, cov, small, 1000, 8);
    const TruncatedMoments tb = box_moments(mu, cov, big, 1000, 8);
    EXPECT_LE(ts.prob, tb.prob + 3 * std::hypot(ts.prob_std_error, tb.prob_std_error));
  }
}

TEST(BoxMoments, FarBoxIsFlaggedDegenerate) {
  const TruncatedMoments tm = box_moments(v1(0.0), m1(1.0), box1(50.0, 51.0), 1000, 1);
  EXPECT_TRUE(tm.degenerate);
  EXPECT_EQ(tm.prob, kProbFloor);
}

TEST(BoxMoments, RejectsMalformedInput) {
  const Eigen::VectorXd mu = Eigen::Vector3d::Zero();
  const Eigen::MatrixXd cov = Eigen::Matrix3d::Identity();
  const BoxRegion box{Eigen::Vector3d::Constant(-1), Eigen::Vector3d::Constant(1)};
  EXPECT_THROW(box_moments(mu, cov, box, 99, 1), std::invalid_argument);
  EXPECT_THROW(box_moments(mu, cov, {box.upper, box.lower}, 1000, 1), std::invalid_argument);
  EXPECT_THROW(box_moments(Eigen::Vector2d::Zero(), cov, box, 1000, 1), std::invalid_argument);
  Eigen::MatrixXd bad = cov;
  bad(2, 2) = -1.0;
  EXPECT_THROW(box_moments(mu, bad, box, 1000, 1), NumericalError);
  EXPECT_THROW(oracle_box_moments(mu, cov, {box.lower.array() + 40, box.upper.array() + 40}, 1000, 1),
               NumericalError);
}
