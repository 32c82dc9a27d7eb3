#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "coverage_inekf/lie_se23.hpp"

namespace coverage_inekf {

/// Time-stamped body-velocity prediction errors (m/s).
struct ErrorSeries {
  std::vector<double> timestamps;
  std::vector<Vec3> errors;

  std::size_t size() const { return errors.size(); }

  /// Throws InputError unless sizes match, timestamps strictly increase and size >= 2.
  void validate() const;
};

struct CoverageBounds {
  Vec3 epsilon = Vec3::Zero();
  double gamma = 0.0;           // joint confidence
  double per_axis_gamma = 0.0;  // gamma^(1/3)
  std::size_t k = 0;            // order statistic used on every axis (1-based)
  std::size_t n_effective = 0;  // calibration samples after subsampling
  std::size_t subsample_k = 1;
};

/// Every K-th sample starting at index 0; ceil(N / K) samples. Throws InputError if K == 0.
ErrorSeries subsample(const ErrorSeries& series, std::size_t k);

/// ceil((N + 1) * per_axis_gamma), robust to round-off in the product.
std::size_t conformal_rank(std::size_t n, double per_axis_gamma);

/// Smallest calibration size for which conformal_rank(n, gamma^(1/3)) <= n.
std::size_t minimum_calibration_size(double gamma);

/// Per-axis split-conformal thresholds on absolute errors with joint confidence gamma.
/// Throws InputError when N < 10, gamma is outside (0, 1), or N is too small for gamma.
CoverageBounds conformal_thresholds(const ErrorSeries& series, double gamma);

struct EmpiricalCoverage {
  double joint = 0.0;
  std::array<double, 3> per_axis{};
};

EmpiricalCoverage empirical_coverage(const ErrorSeries& series, const CoverageBounds& bounds);

/// First lag at which |autocorrelation| drops below `threshold` on each axis
/// (max_lag + 1 when it never does). Guidance for choosing K.
std::array<std::size_t, 3> decorrelation_lags(const ErrorSeries& series, double threshold = 0.05,
                                              std::size_t max_lag = 1000);

}  // namespace coverage_inekf
