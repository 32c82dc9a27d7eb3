#pragma once

#include <vector>

#include "coverage_inekf/campaign_config.hpp"
#include "coverage_inekf/csv.hpp"

namespace coverage_inekf {

struct ReplayDiagnostic {
  double t = 0.0;  // measurement timestamp
  UpdateRule rule = UpdateRule::coverage;
  UpdateDiagnostics diag;  // pi fields are NaN for the gaussian rule
};

struct ReplayOutput {
  std::vector<PoseSample> trajectory;  // one pose per IMU timestamp
  std::vector<ReplayDiagnostic> diagnostics;
  std::size_t n_gaps = 0;
  std::size_t n_dropped = 0;  // measurements before the first IMU timestamp
};

/// Each IMU row is held until the next row's timestamp; the last row only marks the end.
/// A measurement stamped in [t_k, t_{k+1}) is applied at IMU step k (no interpolation).
/// Gaps above 10x the median IMU period log a warning and are bridged in substeps.
ReplayOutput run_replay(const ReplayBundle& bundle, const std::vector<TimedImu>& imu,
                        const std::vector<TimedMeasurement>& meas);

ReplayOutput run_replay(const ReplayBundle& bundle);

/// t,rule,pi_prior,pi_post,active,skipped
void write_diagnostics_csv(std::ostream& out, const std::vector<ReplayDiagnostic>& diags);

}  // namespace coverage_inekf
