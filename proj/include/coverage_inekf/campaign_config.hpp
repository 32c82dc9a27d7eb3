#pragma once

#include <string>
#include <vector>

#include "coverage_inekf/coverage_update.hpp"
#include "coverage_inekf/sim.hpp"

namespace coverage_inekf {

/// Reads an INI campaign file with sections [trajectory], [imu], [noise], [filter] and
/// [campaign]. Missing keys keep their defaults. Unknown sections or keys and unparsable
/// values throw InputError naming the section and key.
CampaignConfig load_campaign_config(const std::string& path);

/// Same format, from an in-memory string.
CampaignConfig parse_campaign_config(const std::string& text);

/// Offline filter run over recorded streams.
struct ReplayBundle {
  std::string imu_path;          // CSV: t, ax, ay, az, gx, gy, gz
  std::string measurement_path;  // CSV: t, vx, vy, vz (may have no rows)
  AugmentedState initial;
  ErrorCov initial_cov = ErrorCov::Identity();
  ProcessNoise noise;
  Vec3 gravity = kDefaultGravity;
  UpdateRule rule = UpdateRule::coverage;
  Mat3 r = Mat3::Identity() * 0.01;  // gaussian rule
  CoverageSpec coverage;              // coverage rule
  SamplerConfig sampler;
  std::uint64_t seed = 1;
};

/// Reads an INI replay file with sections [replay], [initial], [initial_std], [imu],
/// [gaussian] and [coverage]. Relative stream paths resolve against the file's directory.
/// [coverage] takes either `bounds` (a calibrate output document) or `epsilon` and `gamma`.
ReplayBundle load_replay_bundle(const std::string& path);

/// "a, b, c" or "a b c" into numbers. Throws InputError on junk.
std::vector<double> parse_number_list(const std::string& text);

}  // namespace coverage_inekf
