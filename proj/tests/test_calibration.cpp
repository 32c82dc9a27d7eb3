#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "coverage_inekf/calibration.hpp"
#include "coverage_inekf/errors.hpp"
#include "test_support.hpp"

using namespace coverage_inekf;
using coverage_inekf::testing::Gen;

namespace {

ErrorSeries gaussian_series(Gen& g, std::size_t n, const Vec3& sd) {
  ErrorSeries s;
  for (std::size_t i = 0; i < n; ++i) {
    s.timestamps.push_back(0.01 * static_cast<double>(i));
    s.errors.push_back(Vec3(g.normal(), g.normal(), g.normal()).cwiseProduct(sd));
  }
  return s;
}

}  // namespace

TEST(ConformalRank, MatchesIntegerArithmeticForRationalLevels) {
  // ceil((n + 1) p / q) in exact integer arithmetic.
  const std::pair<std::size_t, std::size_t> levels[] = {{9, 10}, {19, 20}, {4, 5}, {3, 4}, {99, 100}};
  for (const auto& [p, q] : levels) {
    const double level = static_cast<double>(p) / static_cast<double>(q);
    for (std::size_t n = 1; n <= 20000; ++n) {
      const std::size_t expected = ((n + 1) * p + q - 1) / q;
      ASSERT_EQ(conformal_rank(n, level), expected) << n << " " << level;
    }
  }
}

TEST(ConformalRank, MatchesExtendedPrecisionForCubeRootLevels) {
  for (double gamma : {0.70, 0.75, 0.80, 0.85, 0.90, 0.95}) {
    const long double g = std::cbrt(static_cast<long double>(gamma));
    for (std::size_t n = 10; n <= 20000; ++n) {
      const long double x = static_cast<long double>(n + 1) * g;
      if (std::abs(x - std::round(x)) < 1e-8L) continue;  // integer up to round-off
      ASSERT_EQ(conformal_rank(n, std::cbrt(gamma)), static_cast<std::size_t>(std::ceil(x)))
          << n << " " << gamma;
    }
  }
}

TEST(ConformalRank, MinimumCalibrationSizeIsTheFirstFeasibleN) {
  for (double gamma : {0.5, 0.7, 0.8, 0.9, 0.95, 0.99}) {
    const std::size_t m = minimum_calibration_size(gamma);
    EXPECT_LE(conformal_rank(m, std::cbrt(gamma)), m);
    EXPECT_GT(conformal_rank(m - 1, std::cbrt(gamma)), m - 1);
  }
}

TEST(ConformalThresholds, PicksTheKthOrderStatisticPerAxis) {
  Gen g(51);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = static_cast<std::size_t>(g.integer(50, 500));
    const ErrorSeries s = gaussian_series(g, n, Vec3(0.1, 0.2, 0.05));
    const CoverageBounds b = conformal_thresholds(s, 0.8);
    const std::size_t k = static_cast<std::size_t>(
        std::ceil(static_cast<double>(n + 1) * std::cbrt(0.8)));
    EXPECT_EQ(b.k, k);
    EXPECT_EQ(b.n_effective, n);
    EXPECT_DOUBLE_EQ(b.per_axis_gamma, std::cbrt(0.8));
    for (int axis = 0; axis < 3; ++axis) {
      std::vector<double> a;
      for (const Vec3& e : s.errors) a.push_back(std::abs(e(axis)));
      std::nth_element(a.begin(), a.begin() + static_cast<long>(k - 1), a.end());
      EXPECT_EQ(b.epsilon(axis), a[k - 1]);
      // Exactly k scores lie at or below the threshold (continuous data, no ties).
      EXPECT_EQ(static_cast<std::size_t>(std::count_if(
                    s.errors.begin(), s.errors.end(),
                    [&](const Vec3& e) { return std::abs(e(axis)) <= b.epsilon(axis); })),
                k);
    }
  }
}

TEST(ConformalThresholds, MarginalCoverageMatchesOrderStatisticLaw) {
  // For exchangeable scores P(|e_test| <= eps) = k / (n + 1) exactly.
  Gen g(52);
  const std::size_t n = 40;
  const int splits = 4000;
  double hits = 0.0;
  std::size_t k = 0;
  for (int i = 0; i < splits; ++i) {
    const ErrorSeries cal = gaussian_series(g, n, Vec3::Ones());
    const CoverageBounds b = conformal_thresholds(cal, 0.8);
    k = b.k;
    hits += std::abs(g.normal()) <= b.epsilon(0);
  }
  const double p = static_cast<double>(k) / static_cast<double>(n + 1);
  EXPECT_NEAR(hits / splits, p, 3.5 * std::sqrt(p * (1 - p) / splits));
}

TEST(ConformalThresholds, RejectsBadInput) {
  Gen g(53);
  EXPECT_THROW(conformal_thresholds(gaussian_series(g, 9, Vec3::Ones()), 0.8), InputError);
  EXPECT_THROW(conformal_thresholds(gaussian_series(g, 100, Vec3::Ones()), 1.0), InputError);
  EXPECT_THROW(conformal_thresholds(gaussian_series(g, 100, Vec3::Ones()), 0.0), InputError);
  const std::size_t need = minimum_calibration_size(0.99);
  try {
    conformal_thresholds(gaussian_series(g, need - 1, Vec3::Ones()), 0.99);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find(std::to_string(need)), std::string::npos) << e.what();
  }
  EXPECT_NO_THROW(conformal_thresholds(gaussian_series(g, need, Vec3::Ones()), 0.99));
}

TEST(ErrorSeries, ValidateChecksShapeAndOrder) {
  ErrorSeries s{{0.0, 1.0}, {Vec3::Zero(), Vec3::Zero()}};
  EXPECT_NO_THROW(s.validate());
  s.timestamps[1] = 0.0;
  EXPECT_THROW(s.validate(), InputError);
  s.timestamps = {0.0};
  EXPECT_THROW(s.validate(), InputError);
  ErrorSeries one{{0.0}, {Vec3::Zero()}};
  EXPECT_THROW(one.validate(), InputError);
}

TEST(Subsample, KeepsEveryKthSample) {
  Gen g(54);
  const ErrorSeries s = gaussian_series(g, 103, Vec3::Ones());
  for (std::size_t k : {1u, 2u, 5u, 103u, 200u}) {
    const ErrorSeries out = subsample(s, k);
    EXPECT_EQ(out.size(), (103 + k - 1) / k);
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_EQ(out.timestamps[i], s.timestamps[i * k]);
      EXPECT_EQ(out.errors[i], s.errors[i * k]);
    }
  }
  EXPECT_THROW(subsample(s, 0), InputError);
}

TEST(EmpiricalCoverage, CountsInclusiveHits) {
  CoverageBounds b;
  b.epsilon = Vec3(1.0, 1.0, 1.0);
  ErrorSeries s{{0, 1, 2, 3},
                {Vec3(1.0, 0, 0), Vec3(1.5, 0, 0), Vec3(0, -2, 0), Vec3(0.5, 0.5, -0.5)}};
  const EmpiricalCoverage c = empirical_coverage(s, b);
  EXPECT_DOUBLE_EQ(c.joint, 0.5);
  EXPECT_DOUBLE_EQ(c.per_axis[0], 0.75);
  EXPECT_DOUBLE_EQ(c.per_axis[1], 0.75);
  EXPECT_DOUBLE_EQ(c.per_axis[2], 1.0);
}

TEST(DecorrelationLags, TrackAutoregressiveMemory) {
  Gen g(55);
  ErrorSeries s;
  const double rho = 0.9;
  Vec3 state = Vec3::Zero();
  for (int i = 0; i < 400000; ++i) {
    state(0) = rho * state(0) + g.normal();
    state(1) = g.normal();
    state(2) = 0.5 * state(2) + g.normal();
    s.timestamps.push_back(i);
    s.errors.push_back(state);
  }
  const auto lags = decorrelation_lags(s);
  const double expected = std::log(0.05) / std::log(rho);  // 28.4
  EXPECT_NEAR(static_cast<double>(lags[0]), std::ceil(expected), 4.0);
  EXPECT_EQ(lags[1], 1u);
  EXPECT_NEAR(static_cast<double>(lags[2]), 5.0, 1.0);
  EXPECT_EQ(decorrelation_lags(s, 0.05, 10)[0], 11u);
}
