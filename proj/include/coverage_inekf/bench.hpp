#pragma once

#include <cstdint>
#include <vector>

#include "coverage_inekf/tmvn.hpp"

namespace coverage_inekf {

struct BoxProblem {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  BoxRegion box;
};

/// Random 3-D Gaussian and a box around it with per-axis half-widths of 0.5 to 2 sigma.
BoxProblem random_box_problem(std::uint64_t seed, int dim = 3);

struct BenchConfig {
  std::vector<int> n_samples{100, 500, 1000, 5000, 10000};
  int trials = 100;
  std::size_t reference_samples = 10'000'000;
  std::uint64_t seed = 1;
  int dim = 3;
};

/// Medians over the random boxes of the errors against the rejection-sampling reference.
struct BenchRow {
  int n_samples = 0;
  double timing_ms = 0.0;            // mean wall time per box_moments call
  double prob_error = 0.0;           // |p - p_ref|
  double mean_error = 0.0;           // l2 of the truncated mean
  double second_moment_error = 0.0;  // Frobenius of E[z z^T | box]
  double cov_error = 0.0;            // Frobenius of the truncated covariance
};

std::vector<BenchRow> run_tmvn_benchmark(const BenchConfig& cfg);

}  // namespace coverage_inekf
