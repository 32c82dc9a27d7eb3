// coverage-inekf: TMVN benchmark, Monte-Carlo campaigns, conformal calibration,
// offline replay and synthetic stream generation.

#include <spdlog/fmt/fmt.h>

#include <CLI11.hpp>
#include <Eigen/Geometry>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "coverage_inekf/bench.hpp"
#include "coverage_inekf/calibration.hpp"
#include "coverage_inekf/campaign_config.hpp"
#include "coverage_inekf/csv.hpp"
#include "coverage_inekf/errors.hpp"
#include "coverage_inekf/log.hpp"
#include "coverage_inekf/replay.hpp"
#include "coverage_inekf/sim.hpp"

namespace ci = coverage_inekf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;

// Writes to `path`, or stdout when path is empty or "-".
template <typename Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) {
    throw ci::InputError("cannot write '" + path + "'");
  }
  write(out);
  if (!out) {
    throw ci::InputError("error writing '" + path + "'");
  }
}

struct BenchArgs {
  ci::BenchConfig cfg;
  std::string out;
};

int cmd_bench_tmvn(const BenchArgs& a) {
  const std::vector<ci::BenchRow> rows = ci::run_tmvn_benchmark(a.cfg);
  emit(a.out, [&](std::ostream& os) {
    os << "samples,timing_ms,prob_error,mean_error,second_moment_error,cov_error\n";
    for (const ci::BenchRow& r : rows) {
      os << fmt::format("{},{:.4g},{:.3e},{:.3e},{:.3e},{:.3e}\n", r.n_samples, r.timing_ms,
                        r.prob_error, r.mean_error, r.second_moment_error, r.cov_error);
    }
  });
  return kExitOk;
}

struct McArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  unsigned jobs = 1;
  std::string out;
};

int cmd_mc(const McArgs& a) {
  ci::CampaignConfig cfg = ci::load_campaign_config(a.config);
  if (a.seed) {
    cfg.campaign.seed = *a.seed;
  }
  if (a.trials) {
    if (*a.trials < 1) {
      throw ci::InputError("--trials must be >= 1");
    }
    cfg.campaign.trials = *a.trials;
  }
  const ci::CampaignResult res = ci::run_monte_carlo(cfg, a.jobs);
  emit(a.out, [&](std::ostream& os) { ci::write_results_csv(os, res.rows); });
  if (res.n_diverged > 0) {
    ci::log::error("{} trial runs diverged", res.n_diverged);
    return kExitNumerical;
  }
  return kExitOk;
}

struct CalibrateArgs {
  std::string input;
  double gamma = 0.8;
  std::size_t subsample_k = 1;
  std::string out;
};

int cmd_calibrate(const CalibrateArgs& a) {
  const ci::ErrorSeries raw = ci::read_error_series(a.input);
  const ci::ErrorSeries cal = ci::subsample(raw, a.subsample_k);
  ci::CoverageBounds b = ci::conformal_thresholds(cal, a.gamma);
  b.subsample_k = a.subsample_k;
  emit(a.out, [&](std::ostream& os) { ci::write_bounds_document(os, b); });

  const auto lags = ci::decorrelation_lags(raw);
  const ci::EmpiricalCoverage cov = ci::empirical_coverage(raw, b);
  std::ostream& report = (a.out.empty() || a.out == "-") ? std::cerr : std::cout;
  report << fmt::format(
      "autocorrelation below 0.05 at lag x={} y={} z={} (samples); K={} keeps {} of {}\n",
      lags[0], lags[1], lags[2], a.subsample_k, cal.size(), raw.size());
  report << fmt::format("in-sample coverage: joint={:.4f} x={:.4f} y={:.4f} z={:.4f}\n",
                        cov.joint, cov.per_axis[0], cov.per_axis[1], cov.per_axis[2]);
  return kExitOk;
}

struct ReplayArgs {
  std::string config;
  std::string update;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_replay(const ReplayArgs& a) {
  ci::ReplayBundle bundle = ci::load_replay_bundle(a.config);
  if (a.update == "gaussian") {
    bundle.rule = ci::UpdateRule::gaussian;
  } else if (a.update == "coverage") {
    bundle.rule = ci::UpdateRule::coverage;
    bundle.coverage.validate();
  }
  if (a.seed) {
    bundle.seed = *a.seed;
  }
  const ci::ReplayOutput res = ci::run_replay(bundle);
  emit(a.out + "_trajectory.csv",
       [&](std::ostream& os) { ci::write_trajectory_csv(os, res.trajectory); });
  emit(a.out + "_diagnostics.csv",
       [&](std::ostream& os) { ci::write_diagnostics_csv(os, res.diagnostics); });
  return kExitOk;
}

struct SimulateArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t trial = 0;
  bool exact_init = false;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  ci::CampaignConfig cfg = ci::load_campaign_config(a.config);
  if (a.seed) {
    cfg.campaign.seed = *a.seed;
  }
  const ci::Truth truth =
      ci::generate_truth(cfg.trajectory, cfg.imu.bias_accel, cfg.imu.bias_gyro);
  const ci::TrialData data = ci::make_trial_data(cfg, truth, a.trial);
  namespace fs = std::filesystem;
  fs::create_directories(a.out);
  const fs::path dir(a.out);

  std::vector<ci::PoseSample> poses;
  std::vector<ci::TimedImu> imu;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    poses.push_back({truth[k].t, truth[k].state.nav});
    // The final row repeats the last sample and only marks the end time.
    const ci::ImuSample& u = data.imu[std::min(k, data.imu.size() - 1)];
    imu.push_back({truth[k].t, u.accel, u.gyro});
  }
  emit((dir / "truth.csv").string(), [&](std::ostream& os) { ci::write_trajectory_csv(os, poses); });
  emit((dir / "imu.csv").string(), [&](std::ostream& os) { ci::write_imu_csv(os, imu); });
  emit((dir / "measurements.csv").string(),
       [&](std::ostream& os) { ci::write_measurement_csv(os, data.measurements); });

  const ci::AugmentedState& x0 = a.exact_init ? truth.front().state : data.initial_estimate;
  const Eigen::Quaterniond q(x0.nav.rot);
  const ci::Mat3 r = cfg.noise.total_covariance();
  const double gamma = 0.8;
  const ci::Vec3 eps = cfg.noise.coverage_radius(gamma);
  auto vec = [](const ci::Vec3& v) { return fmt::format("{}, {}, {}", v.x(), v.y(), v.z()); };
  emit((dir / "replay.ini").string(), [&](std::ostream& os) {
    os << "[replay]\nimu = imu.csv\nmeasurements = measurements.csv\nupdate = coverage\n"
       << "seed = " << cfg.campaign.seed << "\n"
       << "n_samples = " << cfg.filter.sampler.n_samples << "\n"
       << "n_shifts = " << cfg.filter.sampler.n_shifts << "\n\n"
       << "[initial]\n"
       << fmt::format("quaternion = {}, {}, {}, {}\n", q.w(), q.x(), q.y(), q.z())
       << "velocity = " << vec(x0.nav.vel) << "\n"
       << "position = " << vec(x0.nav.pos) << "\n"
       << "accel_bias = " << vec(x0.bias_accel) << "\n"
       << "gyro_bias = " << vec(x0.bias_gyro) << "\n\n"
       << "[initial_std]\n"
       << "rot = " << cfg.filter.p0_rot << "\nvel = " << cfg.filter.p0_vel
       << "\npos = " << cfg.filter.p0_pos << "\naccel_bias = " << cfg.filter.p0_accel_bias
       << "\ngyro_bias = " << cfg.filter.p0_gyro_bias << "\n\n"
       << "[imu]\n"
       << "accel_noise = " << cfg.imu.noise.accel << "\ngyro_noise = " << cfg.imu.noise.gyro
       << "\naccel_bias_walk = " << cfg.imu.accel_bias_walk
       << "\ngyro_bias_walk = " << cfg.imu.gyro_bias_walk << "\n\n"
       << "[gaussian]\n"
       << "sigma = " << vec(r.diagonal().cwiseSqrt()) << "\n\n"
       << "[coverage]\n"
       << "epsilon = " << vec(eps) << "\ngamma = " << gamma << "\n";
  });
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  ci::log::init_from_env();
  CLI::App app{"Coverage-constrained invariant EKF toolkit"};
  app.require_subcommand(1);

  BenchArgs bench;
  auto* b = app.add_subcommand("bench-tmvn", "Truncated-normal estimator runtime and accuracy");
  b->add_option("--n-samples", bench.cfg.n_samples, "Sample counts to evaluate")
      ->check(CLI::Range(100, 100000000));
  b->add_option("--trials", bench.cfg.trials, "Random 3-D boxes")->check(CLI::PositiveNumber);
  b->add_option("--reference-samples", bench.cfg.reference_samples,
                "Rejection-sampling reference size");
  b->add_option("--seed", bench.cfg.seed, "Root seed");
  b->add_option("--out", bench.out, "Output CSV (default stdout)");

  McArgs mc;
  auto* m = app.add_subcommand("mc", "Monte-Carlo campaign");
  m->add_option("--config", mc.config, "Campaign INI file")->required()->check(CLI::ExistingFile);
  m->add_option("--seed", mc.seed, "Override [campaign] seed");
  m->add_option("--trials", mc.trials, "Override [campaign] trials");
  m->add_option("--jobs", mc.jobs, "Worker threads")->check(CLI::PositiveNumber);
  m->add_option("--out", mc.out, "Results CSV (default stdout)");

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Per-axis conformal bounds from an error log");
  c->add_option("input,--input", cal.input, "CSV with columns t, ex, ey, ez")
      ->required()
      ->check(CLI::ExistingFile);
  c->add_option("--gamma", cal.gamma, "Joint confidence")->check(CLI::Range(0.0, 1.0));
  c->add_option("--subsample-k", cal.subsample_k, "Keep every K-th sample")
      ->check(CLI::PositiveNumber);
  c->add_option("--out", cal.out, "Bounds document (default stdout)");

  ReplayArgs rep;
  auto* r = app.add_subcommand("replay", "Run the filter over recorded streams");
  r->add_option("--config", rep.config, "Replay INI file")->required()->check(CLI::ExistingFile);
  r->add_option("--update", rep.update, "Override the update rule")
      ->check(CLI::IsMember({"gaussian", "coverage"}));
  r->add_option("--seed", rep.seed, "Override the sampler seed");
  r->add_option("--out", rep.out, "Output prefix for _trajectory.csv and _diagnostics.csv")
      ->required();

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Write one synthetic trial as replayable streams");
  s->add_option("--config", sim.config, "Campaign INI file")->required()->check(CLI::ExistingFile);
  s->add_option("--seed", sim.seed, "Override [campaign] seed");
  s->add_option("--trial", sim.trial, "Trial index");
  s->add_flag("--exact-init", sim.exact_init, "Start the replay at the true initial state");
  s->add_option("--out", sim.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*b) {
      return cmd_bench_tmvn(bench);
    }
    if (*m) {
      return cmd_mc(mc);
    }
    if (*c) {
      return cmd_calibrate(cal);
    }
    if (*r) {
      return cmd_replay(rep);
    }
    if (*s) {
      return cmd_simulate(sim);
    }
  } catch (const ci::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitInput;
}
