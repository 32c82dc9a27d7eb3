#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "coverage_inekf/coverage_update.hpp"
#include "coverage_inekf/errors.hpp"
#include "test_support.hpp"

using namespace coverage_inekf;
using coverage_inekf::testing::Gen;
using coverage_inekf::testing::piecewise_posterior_moments;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ErrorBelief random_belief(Gen& g, double scale) {
  ErrorBelief bel;
  bel.cov = g.spd(kErrorDim, 0.05) * scale * scale;
  return bel;
}

// One constrained axis embedded in three; the other two axes are independent and unbounded.
FeasibleSet axis_set(double a, double b) {
  return {VelocityJacobian::Zero(), Vec3(a, -kInf, -kInf), Vec3(b, kInf, kInf)};
}

bool same_state(const AugmentedState& a, const AugmentedState& b) {
  return a.nav.rot == b.nav.rot && a.nav.vel == b.nav.vel && a.nav.pos == b.nav.pos &&
         a.bias_accel == b.bias_accel && a.bias_gyro == b.bias_gyro;
}

}  // namespace

TEST(CoverageSpec, ValidatesRanges) {
  EXPECT_NO_THROW((CoverageSpec{Vec3(0.1, 0.1, 0.1), 0.8}.validate()));
  EXPECT_THROW((CoverageSpec{Vec3(-0.1, 0.1, 0.1), 0.8}.validate()), std::invalid_argument);
  EXPECT_THROW((CoverageSpec{Vec3(0.1, 0.1, 0.1), 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((CoverageSpec{Vec3(0.1, 0.1, 0.1), 0.0}.validate()), std::invalid_argument);
}

TEST(FeasibleSet, IsCenteredOnTheInnovation) {
  Gen g(41);
  const AugmentedState x = g.state();
  const Vec3 meas = g.vec3();
  const FeasibleSet fs = build_feasible_set(x, meas, {Vec3(0.1, 0.2, 0.3), 0.8});
  const Vec3 center = meas - x.nav.rot.transpose() * x.nav.vel;
  EXPECT_LT((fs.lower - (center - Vec3(0.1, 0.2, 0.3))).norm(), 1e-12);
  EXPECT_LT((fs.upper - (center + Vec3(0.1, 0.2, 0.3))).norm(), 1e-12);
  EXPECT_EQ(fs.h, body_velocity_jacobian(x));
}

TEST(CoverageUpdate, InactiveUpdateReturnsPriorBitForBit) {
  Gen g(42);
  for (int i = 0; i < 20; ++i) {
    const AugmentedState x = g.state();
    const ErrorBelief bel = random_belief(g, 0.01);
    const Vec3 meas = predicted_body_velocity(x);
    const CoverageUpdateResult res =
        coverage_update(x, bel, meas, {Vec3::Constant(1.0), 0.8}, {}, 3);
    EXPECT_FALSE(res.diagnostics.active);
    EXPECT_TRUE(same_state(res.state, x));
    EXPECT_EQ(res.belief.cov, bel.cov);
    EXPECT_EQ(res.belief.mean, bel.mean);
  }
}

TEST(CoverageUpdate, OutlierIsSkipped) {
  Gen g(43);
  const AugmentedState x = g.state();
  const ErrorBelief bel = random_belief(g, 0.01);
  const Vec3 meas = predicted_body_velocity(x) + Vec3(50.0, 0.0, 0.0);
  const CoverageUpdateResult res = coverage_update(x, bel, meas, {Vec3::Constant(0.1), 0.8}, {}, 3);
  EXPECT_TRUE(res.diagnostics.skipped);
  EXPECT_TRUE(same_state(res.state, x));
  EXPECT_EQ(res.belief.cov, bel.cov);
}

TEST(CoverageUpdate, ActiveUpdateRaisesSetMass) {
  Gen g(44);
  int active = 0;
  for (int i = 0; i < 200; ++i) {
    const AugmentedState x = g.state();
    const ErrorBelief bel = random_belief(g, 0.1);
    const Vec3 meas = predicted_body_velocity(x) + g.vec3(0.1);
    const CoverageSpec spec{Vec3::Constant(g.uniform(0.05, 0.2)), g.uniform(0.6, 0.95)};
    const FeasibleSet fs = build_feasible_set(x, meas, spec);
    const ProjectedPrior proj = project_prior(bel, fs);
    const ZPosterior zp = kl_coverage_posterior(proj.mean_z, proj.cov_z, fs, spec.gamma,
                                                {4000, 10}, 7 + i);
    if (!zp.active) continue;
    ++active;
    EXPECT_GT(zp.posterior_mass, zp.prior_mass);
  }
  EXPECT_GT(active, 50);
}

TEST(CoverageUpdate, LiftReplacesOnlyTheZMarginal) {
  Gen g(45);
  for (int i = 0; i < 30; ++i) {
    const AugmentedState x = g.state();
    const ErrorBelief bel = random_belief(g, 0.1);
    const Vec3 meas = predicted_body_velocity(x) + g.vec3(0.2);
    const CoverageSpec spec{Vec3::Constant(0.05), 0.9};
    const FeasibleSet fs = build_feasible_set(x, meas, spec);
    const ProjectedPrior proj = project_prior(bel, fs);
    const ZPosterior zp =
        kl_coverage_posterior(proj.mean_z, proj.cov_z, fs, spec.gamma, {2000, 10}, 5);
    if (!zp.active) continue;
    // Reconstruct the lifted covariance before the manifold retraction.
    const ErrorCov lifted = bel.cov + proj.gain * (zp.cov - proj.cov_z) * proj.gain.transpose();
    EXPECT_LT((fs.h * lifted * fs.h.transpose() - zp.cov).norm(), 1e-10);
    // The part of Sigma explained by z is swapped; the conditional covariance is unchanged.
    const ErrorCov cond_prior = bel.cov - proj.gain * proj.cov_z * proj.gain.transpose();
    const ErrorCov cond_post = lifted - proj.gain * zp.cov * proj.gain.transpose();
    EXPECT_LT((cond_prior - cond_post).norm(), 1e-10);
    const UpdatedEstimate upd = lift_and_apply(x, bel, zp, proj);
    EXPECT_LT((upd.belief.cov - lifted).norm(), 1e-9);
    EXPECT_EQ(upd.belief.mean, ErrorVec::Zero());
    EXPECT_TRUE(upd.state.nav.is_valid());
  }
}

TEST(CoverageUpdate, OneAxisPosteriorMatchesQuadrature) {
  Gen g(46);
  int checked = 0;
  while (checked < 25) {
    const double mu = g.normal(), s = g.uniform(0.2, 2.0);
    const double gamma = g.uniform(0.6, 0.95);
    const double c = mu + g.uniform(-2.0, 2.0) * s, w = g.uniform(0.2, 2.0) * s;
    const auto ref = piecewise_posterior_moments(mu, s, c - w, c + w, gamma);
    if (ref.prior_mass >= gamma || ref.prior_mass < 1e-6) continue;
    ++checked;
    const Mat3 cov = Vec3(s * s, 1.0, 1.0).asDiagonal();
    const ZPosterior zp = kl_coverage_posterior(Vec3(mu, 0, 0), cov, axis_set(c - w, c + w), gamma,
                                                {100000, 10}, checked);
    ASSERT_TRUE(zp.active);
    EXPECT_NEAR(zp.prior_mass, ref.prior_mass, 1e-9);
    EXPECT_NEAR(zp.mean(0), ref.mean, 1e-3 * std::max(std::abs(ref.mean), s));
    EXPECT_NEAR(zp.cov(0, 0), ref.var, 1e-3 * ref.var);
    // The unconstrained axes keep their prior marginal.
    EXPECT_NEAR(zp.cov(1, 1), 1.0, 2e-3);
    EXPECT_NEAR(zp.mean(1), 0.0, 2e-3);
  }
}

TEST(CoverageUpdate, PosteriorIsContinuousAtTheActivationThreshold) {
  // With gamma just above pi the mixture weights reproduce the prior.
  const double mu = 0.4, s = 0.8, a = -0.3, b = 0.2;
  const double pi = normal_cdf((b - mu) / s) - normal_cdf((a - mu) / s);
  const Mat3 cov = Vec3(s * s, 1.0, 1.0).asDiagonal();
  const ZPosterior zp =
      kl_coverage_posterior(Vec3(mu, 0, 0), cov, axis_set(a, b), pi + 1e-7, {10000, 10}, 1);
  ASSERT_TRUE(zp.active);
  EXPECT_NEAR(zp.mean(0), mu, 1e-5);
  EXPECT_NEAR(zp.cov(0, 0), s * s, 1e-5);
}

TEST(CoverageUpdate, BoundScreeningOnlySkipsCertifiedInactiveUpdates) {
  Gen g(47);
  int screened = 0;
  for (int i = 0; i < 200; ++i) {
    const Vec3 mean = g.vec3(0.05);
    const Mat3 cov = g.spd(3, 0.2) * 0.01;
    const Vec3 half = Vec3::Constant(g.uniform(0.1, 0.5));
    const FeasibleSet fs{VelocityJacobian::Zero(), -half, half};
    const double gamma = g.uniform(0.6, 0.95);
    const ZPosterior plain = kl_coverage_posterior(mean, cov, fs, gamma, {}, i);
    const ZPosterior fast = kl_coverage_posterior(mean, cov, fs, gamma, {}, i, {true, true});
    if (fast.screened) {
      ++screened;
      EXPECT_FALSE(plain.active);
      EXPECT_LE(fast.prior_mass, plain.prior_mass + 3 * plain.prior_mass_std_error + 1e-6);
      EXPECT_EQ(fast.mean, mean);
      EXPECT_EQ(fast.cov, cov);
    } else {
      EXPECT_EQ(fast.active, plain.active);
      EXPECT_EQ(fast.prior_mass, plain.prior_mass);
    }
  }
  EXPECT_GT(screened, 20);
}

TEST(CoverageUpdate, PosteriorMassCanBeSkipped) {
  const Mat3 cov = Mat3::Identity();
  const FeasibleSet fs{VelocityJacobian::Zero(), Vec3::Constant(-0.5), Vec3::Constant(0.5)};
  const ZPosterior zp = kl_coverage_posterior(Vec3::Zero(), cov, fs, 0.5, {}, 1, {false, false});
  ASSERT_TRUE(zp.active);
  EXPECT_TRUE(std::isnan(zp.posterior_mass));
}

TEST(CoverageUpdate, DeterministicForFixedSeed) {
  Gen g(48);
  const AugmentedState x = g.state();
  const ErrorBelief bel = random_belief(g, 0.1);
  const Vec3 meas = predicted_body_velocity(x) + Vec3(0.2, -0.1, 0.05);
  const CoverageSpec spec{Vec3::Constant(0.05), 0.9};
  const CoverageUpdateResult a = coverage_update(x, bel, meas, spec, {}, 11);
  const CoverageUpdateResult b = coverage_update(x, bel, meas, spec, {}, 11);
  ASSERT_TRUE(a.diagnostics.active);
  EXPECT_TRUE(same_state(a.state, b.state));
  EXPECT_EQ(a.belief.cov, b.belief.cov);
}

TEST(CoverageUpdate, CollapsedPriorThrows) {
  ErrorBelief bel;
  bel.cov = ErrorCov::Identity();
  bel.cov.block<3, 3>(kVelIdx, kVelIdx) = Vec3(1.0, 1.0, 1e-14).asDiagonal();
  const AugmentedState x;
  const FeasibleSet fs = build_feasible_set(x, Vec3::Zero(), {Vec3::Constant(0.1), 0.8});
  EXPECT_THROW(project_prior(bel, fs), NumericalError);
  EXPECT_THROW(kl_coverage_posterior(Vec3::Zero(), Mat3::Identity(), fs, 1.2, {}, 1),
               std::invalid_argument);
}
