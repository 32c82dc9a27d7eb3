#include "coverage_inekf/bench.hpp"

#include <algorithm>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <chrono>
#include <stdexcept>

#include "coverage_inekf/log.hpp"
#include "coverage_inekf/rng.hpp"

namespace coverage_inekf {
namespace {

double median(std::vector<double> v) {
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) {
    return *mid;
  }
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

}  // namespace

BoxProblem random_box_problem(std::uint64_t seed, int dim) {
  boost::random::mt19937_64 eng(seed);
  boost::random::normal_distribution<double> n01;
  boost::random::uniform_real_distribution<double> u(-1.0, 1.0);
  boost::random::uniform_real_distribution<double> width(0.5, 2.0);
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      a(i, j) = n01(eng);
    }
  }
  BoxProblem p;
  p.cov = a * a.transpose() / dim + 0.1 * Eigen::MatrixXd::Identity(dim, dim);
  p.mean.resize(dim);
  p.box.lower.resize(dim);
  p.box.upper.resize(dim);
  for (int i = 0; i < dim; ++i) {
    p.mean(i) = 0.5 * n01(eng);
    const double sd = std::sqrt(p.cov(i, i));
    const double center = p.mean(i) + sd * u(eng);
    const double half = sd * width(eng);
    p.box.lower(i) = center - half;
    p.box.upper(i) = center + half;
  }
  return p;
}

std::vector<BenchRow> run_tmvn_benchmark(const BenchConfig& cfg) {
  if (cfg.trials < 1 || cfg.n_samples.empty()) {
    throw std::invalid_argument("benchmark: need at least one trial and one sample size");
  }
  const std::size_t n_sizes = cfg.n_samples.size();
  std::vector<std::vector<double>> perr(n_sizes), merr(n_sizes), serr(n_sizes), cerr(n_sizes);
  std::vector<double> seconds(n_sizes, 0.0);
  std::vector<long> calls(n_sizes, 0);

  for (int trial = 0; trial < cfg.trials; ++trial) {
    const auto t = static_cast<std::uint64_t>(trial);
    const BoxProblem p = random_box_problem(derive_seed(cfg.seed, {t, 0}), cfg.dim);
    const OracleMoments ref =
        oracle_box_moments(p.mean, p.cov, p.box, cfg.reference_samples, derive_seed(cfg.seed, {t, 1}));
    const Eigen::MatrixXd ref_cov =
        ref.inside.second_moment - ref.inside.mean * ref.inside.mean.transpose();
    for (std::size_t s = 0; s < n_sizes; ++s) {
      const int n = cfg.n_samples[s];
      const std::uint64_t seed = derive_seed(cfg.seed, {t, 2, static_cast<std::uint64_t>(n)});
      const TruncatedMoments est = box_moments(p.mean, p.cov, p.box, SamplerConfig{n, 10}, seed);
      // Repeat short calls so each timing sample spans a measurable interval.
      const int reps = std::max(1, 20000 / n);
      const auto start = std::chrono::steady_clock::now();
      for (int r = 0; r < reps; ++r) {
        const TruncatedMoments again =
            box_moments(p.mean, p.cov, p.box, SamplerConfig{n, 10}, seed + r);
        if (again.prob < 0.0) {
          throw std::logic_error("negative probability");
        }
      }
      seconds[s] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      calls[s] += reps;
      const Eigen::MatrixXd cov = est.second_moment - est.mean * est.mean.transpose();
      perr[s].push_back(std::abs(est.prob - ref.inside.prob));
      merr[s].push_back((est.mean - ref.inside.mean).norm());
      serr[s].push_back((est.second_moment - ref.inside.second_moment).norm());
      cerr[s].push_back((cov - ref_cov).norm());
    }
    log::info("benchmark box {}/{} done", trial + 1, cfg.trials);
  }

  std::vector<BenchRow> rows;
  for (std::size_t s = 0; s < n_sizes; ++s) {
    BenchRow r;
    r.n_samples = cfg.n_samples[s];
    r.timing_ms = 1e3 * seconds[s] / static_cast<double>(calls[s]);
    r.prob_error = median(perr[s]);
    r.mean_error = median(merr[s]);
    r.second_moment_error = median(serr[s]);
    r.cov_error = median(cerr[s]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace coverage_inekf
