#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "coverage_inekf/calibration.hpp"
#include "coverage_inekf/coverage_update.hpp"
#include "coverage_inekf/sim.hpp"

namespace coverage_inekf {

/// Numeric CSV with a mandatory header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of `name`; throws InputError if absent.
  std::size_t column(const std::string& name) const;
};

/// Throws InputError naming the file and line on ragged rows or non-numeric cells, and
/// when any of `required` is missing from the header.
CsvTable read_csv(const std::string& path, const std::vector<std::string>& required = {});
CsvTable parse_csv(std::istream& in, const std::string& origin,
                   const std::vector<std::string>& required = {});

/// Columns t, ex, ey, ez. Validated (strictly increasing timestamps, >= 2 rows).
ErrorSeries read_error_series(const std::string& path);
void write_error_series(std::ostream& out, const ErrorSeries& series);

/// method,gamma,rmse_mean,rmse_std,nees_mean,nees_std,frac_active
void write_results_csv(std::ostream& out, const std::vector<MethodSummary>& rows);

struct PoseSample {
  double t = 0.0;
  Se23 nav;
};

/// t,px,py,pz,qw,qx,qy,qz,vx,vy,vz
void write_trajectory_csv(std::ostream& out, const std::vector<PoseSample>& poses);
std::vector<PoseSample> read_trajectory_csv(const std::string& path);

struct TimedImu {
  double t = 0.0;
  Vec3 accel = Vec3::Zero();
  Vec3 gyro = Vec3::Zero();
};

/// t,ax,ay,az,gx,gy,gz
void write_imu_csv(std::ostream& out, const std::vector<TimedImu>& samples);
std::vector<TimedImu> read_imu_csv(const std::string& path);

/// t,vx,vy,vz
void write_measurement_csv(std::ostream& out, const std::vector<TimedMeasurement>& meas);
std::vector<TimedMeasurement> read_measurement_csv(const std::string& path);

/// `key = value` lines: gamma, per_axis_gamma, K, n_effective, rank, eps_x, eps_y, eps_z.
void write_bounds_document(std::ostream& out, const CoverageBounds& bounds);
CoverageBounds read_bounds_document(const std::string& path);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

}  // namespace coverage_inekf
