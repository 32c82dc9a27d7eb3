#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "coverage_inekf/inekf_core.hpp"
#include "coverage_inekf/tmvn.hpp"

namespace coverage_inekf {

enum class TrajectoryPattern { figure_eight, circle };

TrajectoryPattern parse_pattern(const std::string& name);
std::string to_string(TrajectoryPattern p);

/// Legged-base trajectory: a planar curve with gait-rate body sway and vertical bob.
struct TrajectorySpec {
  TrajectoryPattern pattern = TrajectoryPattern::figure_eight;
  double duration = 60.0;    // s
  double rate = 100.0;       // Hz, in [50, 1000]
  double speed = 1.0;        // m/s, mean ground speed; 0 gives a constant pose
  double size = 4.0;         // m, curve amplitude (circle radius)
  double gait_frequency = 2.0;   // Hz, snapped to a multiple of the curve frequency
  double bob_amplitude = 0.01;   // m
  double sway_amplitude = 0.02;  // rad, roll; pitch uses 3/4 of it

  void validate() const;
  std::size_t n_samples() const;  // duration * rate, rounded
  double dt() const { return 1.0 / rate; }
  /// Time for one traversal of the curve (infinity at zero speed).
  double period() const;
};

struct TruthSample {
  double t = 0.0;
  AugmentedState state;  // biases are the true (fixed) IMU biases
};

using Truth = std::vector<TruthSample>;

Truth generate_truth(const TrajectorySpec& spec, const Vec3& bias_accel = Vec3::Zero(),
                     const Vec3& bias_gyro = Vec3::Zero());

/// White-noise densities of the simulated IMU. Zero densities give noise-free output.
struct ImuNoise {
  double accel = 0.0;  // m/s^2/sqrt(Hz)
  double gyro = 0.0;   // rad/s/sqrt(Hz)
};

/// Sample k drives truth[k] to truth[k+1] under propagate_mean, so the output has
/// truth.size() - 1 entries.
std::vector<ImuSample> synthesize_imu(const Truth& truth, const ImuNoise& noise,
                                      std::uint64_t seed, const Vec3& gravity = kDefaultGravity);

struct GaussianNoise {
  Mat3 r = Mat3::Identity() * 0.01;
};

struct MixtureComponent {
  double weight = 1.0;
  Vec3 mean = Vec3::Zero();
  Mat3 cov = Mat3::Identity();
};

/// One component is drawn per trajectory and held for its whole length.
struct FixedComponentMixture {
  std::vector<MixtureComponent> components;
};

struct NoiseModel {
  std::variant<GaussianNoise, FixedComponentMixture> variant = GaussianNoise{};

  /// Throws InputError on non-PD covariances or weights that do not sum to 1.
  void validate() const;

  Vec3 mean() const;
  /// Mean-of-covariances plus covariance-of-means.
  Mat3 total_covariance() const;
  /// Per-axis epsilon with P(|e_j| <= epsilon_j) = gamma^(1/3) under the marginal law.
  Vec3 coverage_radius(double gamma) const;

  /// Four equal-weight components at (+-0.15, +-0.15, 0) m/s with cov 0.05^2 I.
  static NoiseModel default_mixture();
};

struct TimedMeasurement {
  double t = 0.0;
  Vec3 value = Vec3::Zero();
};

/// Body-velocity pseudo-measurements at truth indices stride, 2 stride, ... (index 0 is the
/// initial state and carries no measurement).
std::vector<TimedMeasurement> synthesize_measurements(const Truth& truth, const NoiseModel& noise,
                                                      std::uint64_t seed, std::size_t stride = 1);

struct ImuSettings {
  ImuNoise noise;
  double accel_bias_walk = 1e-3;
  double gyro_bias_walk = 1e-4;
  Vec3 bias_accel = Vec3::Zero();
  Vec3 bias_gyro = Vec3::Zero();
};

/// Initial standard deviations and sampler settings shared by every method.
struct FilterSettings {
  double p0_rot = 0.01;
  double p0_vel = 0.1;
  double p0_pos = 0.1;
  double p0_accel_bias = 0.05;
  double p0_gyro_bias = 0.005;
  double measurement_rate = 100.0;  // Hz; must divide the IMU rate
  SamplerConfig sampler;
  Vec3 gravity = kDefaultGravity;

  ErrorCov initial_covariance() const;
};

struct CampaignSettings {
  std::size_t trials = 50;
  std::uint64_t seed = 1;
  std::vector<double> gammas{0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
  bool baseline = true;
};

struct CampaignConfig {
  TrajectorySpec trajectory;
  ImuSettings imu;
  NoiseModel noise;
  FilterSettings filter;
  CampaignSettings campaign;

  void validate() const;
  std::size_t measurement_stride() const;
};

enum class UpdateRule { gaussian, coverage };

struct MethodSpec {
  UpdateRule rule = UpdateRule::gaussian;
  double gamma = 0.0;            // coverage only
  Mat3 r = Mat3::Identity();     // gaussian only
  Vec3 epsilon = Vec3::Zero();   // coverage only

  std::string name() const;
};

/// Baseline (R = total noise covariance) first, then one coverage method per gamma.
std::vector<MethodSpec> campaign_methods(const CampaignConfig& cfg);

/// Everything random about one trial; shared by all methods (common random numbers).
struct TrialData {
  std::uint64_t seed = 0;
  std::vector<ImuSample> imu;
  std::vector<TimedMeasurement> measurements;
  AugmentedState initial_estimate;
  ErrorCov initial_cov;
};

TrialData make_trial_data(const CampaignConfig& cfg, const Truth& truth, std::size_t trial_index);

struct TrialResult {
  std::uint64_t seed = 0;
  double rmse_pos = 0.0;
  std::vector<double> nees_pos;  // one entry per truth sample that was reached
  double nees_mean = 0.0;
  double frac_active = 0.0;      // coverage methods only
  bool diverged = false;
  std::string failure;
};

/// Position NEES under the right-invariant error: e = log(Xhat X^-1) position block.
double position_nees(const AugmentedState& estimate, const ErrorBelief& bel, const Se23& truth);

TrialResult run_trial(const CampaignConfig& cfg, const Truth& truth, const TrialData& data,
                      const MethodSpec& method);

struct MethodSummary {
  MethodSpec method;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  double nees_mean = 0.0;
  double nees_std = 0.0;
  double frac_active = 0.0;
  std::size_t n_trials = 0;    // non-diverged trials in the aggregate
  std::size_t n_diverged = 0;
};

struct CampaignResult {
  std::vector<MethodSummary> rows;
  std::vector<std::vector<TrialResult>> trials;  // [method][trial]
  std::size_t n_diverged = 0;
};

/// Mean and sample standard deviation over the non-diverged trials, in trial order.
MethodSummary summarize(const MethodSpec& method, const std::vector<TrialResult>& trials);

/// Runs every trial for every method on up to `jobs` threads; the result does not depend
/// on `jobs` or on completion order.
CampaignResult run_monte_carlo(const CampaignConfig& cfg, unsigned jobs = 1);

}  // namespace coverage_inekf
