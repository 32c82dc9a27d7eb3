#include "coverage_inekf/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "coverage_inekf/errors.hpp"

namespace coverage_inekf {

void ErrorSeries::validate() const {
  if (timestamps.size() != errors.size()) {
    throw InputError("error series: timestamp and error counts differ");
  }
  if (errors.size() < 2) {
    throw InputError("error series: need at least 2 samples");
  }
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (!(timestamps[i] > timestamps[i - 1])) {
      std::ostringstream msg;
      msg << "error series: timestamps not strictly increasing at row " << i;
      throw InputError(msg.str());
    }
  }
}

ErrorSeries subsample(const ErrorSeries& series, std::size_t k) {
  if (k == 0) {
    throw InputError("subsample: K must be >= 1");
  }
  ErrorSeries out;
  const std::size_t n = series.size();
  out.timestamps.reserve(n / k + 1);
  out.errors.reserve(n / k + 1);
  for (std::size_t i = 0; i < n; i += k) {
    out.timestamps.push_back(series.timestamps[i]);
    out.errors.push_back(series.errors[i]);
  }
  return out;
}

std::size_t conformal_rank(std::size_t n, double per_axis_gamma) {
  const double x = static_cast<double>(n + 1) * per_axis_gamma;
  // A product that is an integer up to round-off must not be pushed to the next rank.
  return static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
}

std::size_t minimum_calibration_size(double gamma) {
  const double g = std::cbrt(gamma);
  std::size_t n = 1;
  while (conformal_rank(n, g) > n) {
    ++n;
  }
  return n;
}

CoverageBounds conformal_thresholds(const ErrorSeries& series, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InputError("conformal_thresholds: gamma must be in (0, 1)");
  }
  const std::size_t n = series.size();
  if (n < 10) {
    throw InputError("conformal_thresholds: need at least 10 calibration samples");
  }
  CoverageBounds b;
  b.gamma = gamma;
  b.per_axis_gamma = std::cbrt(gamma);
  b.n_effective = n;
  b.k = conformal_rank(n, b.per_axis_gamma);
  if (b.k > n) {
    std::ostringstream msg;
    msg << "conformal_thresholds: " << n << " samples are insufficient for gamma=" << gamma
        << "; at least " << std::max<std::size_t>(10, minimum_calibration_size(gamma))
        << " are required";
    throw InputError(msg.str());
  }
  std::vector<double> scores(n);
  for (int axis = 0; axis < 3; ++axis) {
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = std::abs(series.errors[i](axis));
    }
    std::stable_sort(scores.begin(), scores.end());
    b.epsilon(axis) = scores[b.k - 1];
  }
  return b;
}

EmpiricalCoverage empirical_coverage(const ErrorSeries& series, const CoverageBounds& bounds) {
  EmpiricalCoverage out;
  const std::size_t n = series.size();
  if (n == 0) {
    throw InputError("empirical_coverage: empty series");
  }
  std::array<std::size_t, 3> axis_hits{};
  std::size_t joint_hits = 0;
  for (const Vec3& e : series.errors) {
    bool all = true;
    for (int axis = 0; axis < 3; ++axis) {
      const bool hit = std::abs(e(axis)) <= bounds.epsilon(axis);
      axis_hits[axis] += hit;
      all = all && hit;
    }
    joint_hits += all;
  }
  const auto dn = static_cast<double>(n);
  out.joint = static_cast<double>(joint_hits) / dn;
  for (int axis = 0; axis < 3; ++axis) {
    out.per_axis[axis] = static_cast<double>(axis_hits[axis]) / dn;
  }
  return out;
}

std::array<std::size_t, 3> decorrelation_lags(const ErrorSeries& series, double threshold,
                                              std::size_t max_lag) {
  std::array<std::size_t, 3> lags{};
  const std::size_t n = series.size();
  for (int axis = 0; axis < 3; ++axis) {
    double mean = 0.0;
    for (const Vec3& e : series.errors) {
      mean += e(axis);
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const Vec3& e : series.errors) {
      var += (e(axis) - mean) * (e(axis) - mean);
    }
    lags[axis] = max_lag + 1;
    if (var <= 0.0) {
      lags[axis] = 1;  // constant series carries no dependence
      continue;
    }
    for (std::size_t lag = 1; lag <= std::min(max_lag, n - 1); ++lag) {
      double c = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) {
        c += (series.errors[i](axis) - mean) * (series.errors[i + lag](axis) - mean);
      }
      if (std::abs(c / var) < threshold) {
        lags[axis] = lag;
        break;
      }
    }
  }
  return lags;
}

}  // namespace coverage_inekf
