#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>

namespace coverage_inekf {

/// Estimated box mass below which the box is treated as degenerate.
inline constexpr double kProbFloor = 1e-9;

/// Infinite bounds are replaced by mean +/- kBoundClamp standard deviations.
inline constexpr double kBoundClamp = 38.0;

/// Axis-aligned box; entries may be +/- infinity.
struct BoxRegion {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static BoxRegion unbounded(Eigen::Index n);
  Eigen::Index dim() const { return lower.size(); }
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& z) const;
};

struct SamplerConfig {
  int n_samples = 1000;  // total lattice points, split evenly across shifts
  int n_shifts = 10;     // independent random shifts; their spread gives the standard error
};

/// Mass and truncated moments of N(mean, cov) restricted to a box.
struct TruncatedMoments {
  double prob = 0.0;
  double prob_std_error = 0.0;
  Eigen::VectorXd mean;           // E[z | z in box]
  Eigen::MatrixXd second_moment;  // E[z z^T | z in box]
  bool degenerate = false;        // prob fell below kProbFloor and was clamped to it
};

/// Randomized quasi-Monte-Carlo estimate by sequential conditioning (separation of
/// variables) over a shifted Richtmyer lattice. Every lattice point lands inside the
/// box and carries the conditional-mass product as its weight, so one pass yields
/// the probability and both truncated moments. Deterministic for a fixed seed.
///
/// Throws NumericalError when cov is not positive definite and std::invalid_argument
/// for malformed boxes or n_samples < 100.
TruncatedMoments box_moments(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                             const BoxRegion& box, const SamplerConfig& config, std::uint64_t seed);

inline TruncatedMoments box_moments(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                    const BoxRegion& box, int n_samples, std::uint64_t seed) {
  return box_moments(mean, cov, box, SamplerConfig{n_samples, 10}, seed);
}

struct BoxProbability {
  double prob = 0.0;
  double std_error = 0.0;
};

/// Probability-only variant of box_moments (skips the last coordinate draw).
BoxProbability box_probability(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                               const BoxRegion& box, const SamplerConfig& config,
                               std::uint64_t seed);

/// Plain rejection-sampling reference. Slow; never used inside the filter.
struct OracleMoments {
  TruncatedMoments inside;
  Eigen::VectorXd complement_mean;
  Eigen::MatrixXd complement_second_moment;
  Eigen::VectorXd mean_std_error;  // per-coordinate standard error of inside.mean
  std::size_t n_samples = 0;
  std::size_t n_accepted = 0;
};

/// Throws NumericalError when no sample lands in the box.
OracleMoments oracle_box_moments(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                 const BoxRegion& box, std::size_t n_samples, std::uint64_t seed);

/// Standard normal CDF and quantile.
double normal_cdf(double x);
double normal_quantile(double p);

}  // namespace coverage_inekf
