#include "coverage_inekf/replay.hpp"

#include <spdlog/fmt/fmt.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "coverage_inekf/errors.hpp"
#include "coverage_inekf/filter.hpp"
#include "coverage_inekf/log.hpp"
#include "coverage_inekf/rng.hpp"

namespace coverage_inekf {
namespace {

double median_period(const std::vector<TimedImu>& imu) {
  std::vector<double> d;
  for (std::size_t i = 1; i < imu.size(); ++i) {
    d.push_back(imu[i].t - imu[i - 1].t);
  }
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

}  // namespace

ReplayOutput run_replay(const ReplayBundle& bundle, const std::vector<TimedImu>& imu,
                        const std::vector<TimedMeasurement>& meas) {
  if (imu.size() < 2) {
    throw InputError("replay: IMU stream needs at least 2 rows");
  }
  ReplayOutput out;
  const double nominal = median_period(imu);
  // Substep length when bridging; propagate() rejects steps above 0.1 s.
  const double max_step = std::min(nominal, 0.1);
  ErrorBelief bel;
  bel.cov = bundle.initial_cov;
  InvariantFilter filter(bundle.initial, bel, bundle.noise, bundle.gravity);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::size_t j = 0;
  while (j < meas.size() && meas[j].t < imu.front().t) {
    ++j;
    ++out.n_dropped;
  }
  if (out.n_dropped > 0) {
    log::warn("replay: {} measurements precede the first IMU sample and were dropped",
              out.n_dropped);
  }

  out.trajectory.reserve(imu.size());
  for (std::size_t k = 0; k < imu.size(); ++k) {
    const double t_next =
        k + 1 < imu.size() ? imu[k + 1].t : std::numeric_limits<double>::infinity();
    for (; j < meas.size() && meas[j].t < t_next; ++j) {
      ReplayDiagnostic d;
      d.t = meas[j].t;
      d.rule = bundle.rule;
      if (bundle.rule == UpdateRule::gaussian) {
        filter.update_gaussian(meas[j].value, bundle.r);
        d.diag = {nan, nan, true, false, false};
      } else {
        d.diag = filter.update_coverage(meas[j].value, bundle.coverage, bundle.sampler,
                                        derive_seed(bundle.seed, {k, j}));
      }
      out.diagnostics.push_back(d);
    }
    out.trajectory.push_back({imu[k].t, filter.state().nav});
    if (k + 1 == imu.size()) {
      break;
    }

    const double span = t_next - imu[k].t;
    int substeps = 1;
    if (span > 10.0 * nominal) {
      ++out.n_gaps;
      log::warn("replay: IMU gap of {:.4g} s at t={:.6g} (nominal {:.4g} s); bridging", span,
                imu[k].t, nominal);
    }
    if (span > max_step * (1.0 + 1e-9)) {
      substeps = static_cast<int>(std::ceil(span / max_step));
    }
    ImuSample u;
    u.accel = imu[k].accel;
    u.gyro = imu[k].gyro;
    u.dt = span / substeps;
    for (int s = 0; s < substeps; ++s) {
      filter.propagate(u);
    }
    if (!filter.state().nav.matrix().allFinite() || !filter.belief().cov.allFinite()) {
      throw NumericalError(fmt::format("replay: non-finite state at t={}", t_next));
    }
  }
  return out;
}

ReplayOutput run_replay(const ReplayBundle& bundle) {
  return run_replay(bundle, read_imu_csv(bundle.imu_path),
                    read_measurement_csv(bundle.measurement_path));
}

void write_diagnostics_csv(std::ostream& out, const std::vector<ReplayDiagnostic>& diags) {
  out << "t,rule,pi_prior,pi_post,active,skipped\n";
  for (const ReplayDiagnostic& d : diags) {
    out << fmt::format("{},{},{:.6g},{:.6g},{},{}\n", d.t,
                       d.rule == UpdateRule::gaussian ? "gaussian" : "coverage", d.diag.pi_prior,
                       d.diag.pi_post, d.diag.active ? 1 : 0, d.diag.skipped ? 1 : 0);
  }
}

}  // namespace coverage_inekf
