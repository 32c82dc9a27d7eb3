#include "coverage_inekf/sim.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <boost/math/tools/roots.hpp>
#include <boost/random/discrete_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "coverage_inekf/coverage_update.hpp"
#include "coverage_inekf/errors.hpp"
#include "coverage_inekf/filter.hpp"
#include "coverage_inekf/log.hpp"
#include "coverage_inekf/rng.hpp"

namespace coverage_inekf {
namespace {

using Engine = boost::random::mt19937_64;

// Per-trial stream identifiers for derive_seed.
constexpr std::uint64_t kImuStream = 1;
constexpr std::uint64_t kMeasurementStream = 2;
constexpr std::uint64_t kInitialErrorStream = 3;
constexpr std::uint64_t kSamplerStream = 4;

// Campaign metrics never read pi_t^+, and a certified-inactive step needs no estimate.
constexpr UpdateOptions kCampaignOptions{true, false};

// Mean of sqrt(cos^2 th + cos^2 2th) over a period: average ground speed of the
// figure-eight per unit (A * omega).
double figure_eight_speed_factor() {
  static const double factor = [] {
    constexpr int n = 4096;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double th = 2.0 * std::numbers::pi * (i + 0.5) / n;
      acc += std::hypot(std::cos(th), std::cos(2.0 * th));
    }
    return acc / n;
  }();
  return factor;
}

double curve_frequency(const TrajectorySpec& spec) {
  if (spec.speed == 0.0) {
    return 0.0;
  }
  switch (spec.pattern) {
    case TrajectoryPattern::figure_eight:
      return spec.speed / (spec.size * figure_eight_speed_factor());
    case TrajectoryPattern::circle:
      return spec.speed / spec.size;
  }
  return 0.0;
}

double gait_frequency(const TrajectorySpec& spec, double omega) {
  if (omega == 0.0) {
    return 0.0;
  }
  const double harmonics = std::max(1.0, std::round(2.0 * std::numbers::pi * spec.gait_frequency / omega));
  return harmonics * omega;
}

Mat3 rot_z(double a) {
  Mat3 r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

Mat3 rot_y(double a) {
  Mat3 r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}

Mat3 rot_x(double a) {
  Mat3 r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}

// Symmetric square root that tolerates a singular (e.g. zero) covariance.
Mat3 covariance_factor(const Mat3& cov) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(symmetrized(cov));
  const Vec3 s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

Vec3 draw_normal3(Engine& eng, boost::random::normal_distribution<double>& n01) {
  return Vec3(n01(eng), n01(eng), n01(eng));
}

bool is_positive_definite(const Mat3& m) {
  if ((m - m.transpose()).norm() > 1e-12 * std::max(1.0, m.norm())) {
    return false;
  }
  Eigen::LLT<Mat3> llt(m);
  return llt.info() == Eigen::Success;
}

bool is_finite(const InvariantFilter& f) {
  return f.state().nav.matrix().allFinite() && f.state().bias_accel.allFinite() &&
         f.state().bias_gyro.allFinite() && f.belief().cov.allFinite() &&
         f.belief().mean.allFinite();
}

}  // namespace

TrajectoryPattern parse_pattern(const std::string& name) {
  if (name == "figure_eight") {
    return TrajectoryPattern::figure_eight;
  }
  if (name == "circle") {
    return TrajectoryPattern::circle;
  }
  throw InputError("unknown trajectory pattern '" + name + "' (figure_eight, circle)");
}

std::string to_string(TrajectoryPattern p) {
  return p == TrajectoryPattern::circle ? "circle" : "figure_eight";
}

void TrajectorySpec::validate() const {
  if (!(duration > 0.0)) {
    throw InputError("trajectory: duration must be > 0");
  }
  if (!(rate >= 50.0 && rate <= 1000.0)) {
    throw InputError("trajectory: rate must be in [50, 1000] Hz");
  }
  if (!(speed >= 0.0) || !std::isfinite(speed)) {
    throw InputError("trajectory: speed must be >= 0");
  }
  if (!(size > 0.0)) {
    throw InputError("trajectory: size must be > 0");
  }
  if (!(gait_frequency > 0.0) || bob_amplitude < 0.0 || sway_amplitude < 0.0) {
    throw InputError("trajectory: gait parameters must be non-negative (frequency > 0)");
  }
  if (n_samples() < 2) {
    throw InputError("trajectory: duration * rate must give at least 2 samples");
  }
}

std::size_t TrajectorySpec::n_samples() const {
  return static_cast<std::size_t>(std::llround(duration * rate));
}

double TrajectorySpec::period() const {
  const double omega = curve_frequency(*this);
  return omega == 0.0 ? std::numeric_limits<double>::infinity() : 2.0 * std::numbers::pi / omega;
}

Truth generate_truth(const TrajectorySpec& spec, const Vec3& bias_accel, const Vec3& bias_gyro) {
  spec.validate();
  const double omega = curve_frequency(spec);
  const double gait = gait_frequency(spec, omega);
  const double a = spec.size;
  const std::size_t n = spec.n_samples();

  Truth truth(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / spec.rate;
    const double th = omega * t;
    Vec3 p = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    switch (spec.pattern) {
      case TrajectoryPattern::figure_eight:
        p << a * std::sin(th), 0.5 * a * std::sin(2.0 * th), 0.0;
        v << a * omega * std::cos(th), a * omega * std::cos(2.0 * th), 0.0;
        break;
      case TrajectoryPattern::circle:
        p << a * std::cos(th), a * std::sin(th), 0.0;
        v << -a * omega * std::sin(th), a * omega * std::cos(th), 0.0;
        break;
    }
    double yaw = 0.0;
    double roll = 0.0;
    double pitch = 0.0;
    if (omega != 0.0) {
      yaw = std::atan2(v.y(), v.x());
      p.z() = spec.bob_amplitude * std::sin(gait * t);
      v.z() = spec.bob_amplitude * gait * std::cos(gait * t);
      roll = spec.sway_amplitude * std::sin(gait * t);
      pitch = 0.75 * spec.sway_amplitude * std::cos(gait * t);
    }
    TruthSample& s = truth[k];
    s.t = t;
    s.state.nav.rot = rot_z(yaw) * rot_y(pitch) * rot_x(roll);
    s.state.nav.vel = v;
    s.state.nav.pos = p;
    s.state.bias_accel = bias_accel;
    s.state.bias_gyro = bias_gyro;
  }
  return truth;
}

std::vector<ImuSample> synthesize_imu(const Truth& truth, const ImuNoise& noise,
                                      std::uint64_t seed, const Vec3& gravity) {
  std::vector<ImuSample> out;
  if (truth.size() < 2) {
    return out;
  }
  out.reserve(truth.size() - 1);
  Engine eng(seed);
  boost::random::normal_distribution<double> n01;
  for (std::size_t k = 0; k + 1 < truth.size(); ++k) {
    const AugmentedState& x0 = truth[k].state;
    const AugmentedState& x1 = truth[k + 1].state;
    const double dt = truth[k + 1].t - truth[k].t;
    if (!(dt > 0.0)) {
      throw InputError("synthesize_imu: truth timestamps must increase");
    }
    // Inverse of propagate_mean: inputs held constant over the step reproduce x1 exactly
    // in rotation and velocity.
    const Vec3 phi = log_so3(x0.nav.rot.transpose() * x1.nav.rot);
    ImuSample u;
    u.dt = dt;
    u.gyro = phi / dt + x0.bias_gyro;
    u.accel = left_jacobian_inv_so3(phi) * x0.nav.rot.transpose() *
                  ((x1.nav.vel - x0.nav.vel) / dt - gravity) +
              x0.bias_accel;
    const double sd = 1.0 / std::sqrt(dt);
    u.accel += noise.accel * sd * draw_normal3(eng, n01);
    u.gyro += noise.gyro * sd * draw_normal3(eng, n01);
    out.push_back(u);
  }
  return out;
}

void NoiseModel::validate() const {
  if (const auto* g = std::get_if<GaussianNoise>(&variant)) {
    if (!is_positive_definite(g->r)) {
      throw InputError("noise: Gaussian covariance must be symmetric positive definite");
    }
    return;
  }
  const auto& mix = std::get<FixedComponentMixture>(variant);
  if (mix.components.empty()) {
    throw InputError("noise: mixture needs at least one component");
  }
  double wsum = 0.0;
  for (const MixtureComponent& c : mix.components) {
    if (!(c.weight >= 0.0)) {
      throw InputError("noise: mixture weights must be non-negative");
    }
    if (!is_positive_definite(c.cov)) {
      throw InputError("noise: mixture component covariance must be symmetric positive definite");
    }
    wsum += c.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-9) {
    throw InputError("noise: mixture weights must sum to 1");
  }
}

Vec3 NoiseModel::mean() const {
  if (std::holds_alternative<GaussianNoise>(variant)) {
    return Vec3::Zero();
  }
  Vec3 m = Vec3::Zero();
  for (const MixtureComponent& c : std::get<FixedComponentMixture>(variant).components) {
    m += c.weight * c.mean;
  }
  return m;
}

Mat3 NoiseModel::total_covariance() const {
  if (const auto* g = std::get_if<GaussianNoise>(&variant)) {
    return g->r;
  }
  const Vec3 m = mean();
  Mat3 cov = Mat3::Zero();
  for (const MixtureComponent& c : std::get<FixedComponentMixture>(variant).components) {
    const Vec3 d = c.mean - m;
    cov += c.weight * (c.cov + d * d.transpose());
  }
  return symmetrized(cov);
}

Vec3 NoiseModel::coverage_radius(double gamma) const {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InputError("coverage radius: gamma must be in (0, 1)");
  }
  const double g = std::cbrt(gamma);
  Vec3 eps;
  if (const auto* gn = std::get_if<GaussianNoise>(&variant)) {
    const double q = normal_quantile(0.5 * (1.0 + g));
    for (int j = 0; j < 3; ++j) {
      eps(j) = std::sqrt(gn->r(j, j)) * q;
    }
    return eps;
  }
  const auto& comps = std::get<FixedComponentMixture>(variant).components;
  for (int j = 0; j < 3; ++j) {
    auto mass = [&](double e) {
      double m = 0.0;
      for (const MixtureComponent& c : comps) {
        const double s = std::sqrt(c.cov(j, j));
        m += c.weight * (normal_cdf((e - c.mean(j)) / s) - normal_cdf((-e - c.mean(j)) / s));
      }
      return m - g;
    };
    double hi = 0.0;
    for (const MixtureComponent& c : comps) {
      hi = std::max(hi, std::abs(c.mean(j)) + 40.0 * std::sqrt(c.cov(j, j)));
    }
    std::uintmax_t iters = 200;
    const auto root = boost::math::tools::toms748_solve(
        mass, 0.0, hi, mass(0.0), mass(hi), boost::math::tools::eps_tolerance<double>(50), iters);
    eps(j) = 0.5 * (root.first + root.second);
  }
  return eps;
}

NoiseModel NoiseModel::default_mixture() {
  FixedComponentMixture mix;
  const Mat3 cov = Mat3::Identity() * (0.05 * 0.05);
  for (double sx : {1.0, -1.0}) {
    for (double sy : {1.0, -1.0}) {
      mix.components.push_back({0.25, Vec3(0.15 * sx, 0.15 * sy, 0.0), cov});
    }
  }
  return NoiseModel{mix};
}

std::vector<TimedMeasurement> synthesize_measurements(const Truth& truth, const NoiseModel& noise,
                                                      std::uint64_t seed, std::size_t stride) {
  if (stride == 0) {
    throw InputError("synthesize_measurements: stride must be >= 1");
  }
  Engine eng(seed);
  boost::random::normal_distribution<double> n01;
  Vec3 offset = Vec3::Zero();
  Mat3 factor;
  if (const auto* g = std::get_if<GaussianNoise>(&noise.variant)) {
    factor = covariance_factor(g->r);
  } else {
    const auto& comps = std::get<FixedComponentMixture>(noise.variant).components;
    std::vector<double> weights;
    for (const MixtureComponent& c : comps) {
      weights.push_back(c.weight);
    }
    boost::random::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    const MixtureComponent& c = comps[pick(eng)];
    offset = c.mean;
    factor = covariance_factor(c.cov);
  }
  std::vector<TimedMeasurement> out;
  out.reserve(truth.size() / stride + 1);
  for (std::size_t k = stride; k < truth.size(); k += stride) {
    const Se23& x = truth[k].state.nav;
    TimedMeasurement m;
    m.t = truth[k].t;
    m.value = x.rot.transpose() * x.vel + offset + factor * draw_normal3(eng, n01);
    out.push_back(m);
  }
  return out;
}

ErrorCov FilterSettings::initial_covariance() const {
  ErrorVec sd;
  sd << Vec3::Constant(p0_rot), Vec3::Constant(p0_vel), Vec3::Constant(p0_pos),
      Vec3::Constant(p0_accel_bias), Vec3::Constant(p0_gyro_bias);
  return sd.cwiseProduct(sd).asDiagonal();
}

void CampaignConfig::validate() const {
  trajectory.validate();
  noise.validate();
  if (campaign.trials < 1) {
    throw InputError("campaign: trials must be >= 1");
  }
  for (double g : campaign.gammas) {
    if (!(g > 0.0 && g < 1.0)) {
      throw InputError("campaign: every gamma must be in (0, 1)");
    }
  }
  if (!campaign.baseline && campaign.gammas.empty()) {
    throw InputError("campaign: no methods to run");
  }
  if (imu.noise.accel < 0.0 || imu.noise.gyro < 0.0 || imu.accel_bias_walk < 0.0 ||
      imu.gyro_bias_walk < 0.0) {
    throw InputError("imu: noise densities must be >= 0");
  }
  if (!(filter.p0_rot > 0.0 && filter.p0_vel > 0.0 && filter.p0_pos > 0.0 &&
        filter.p0_accel_bias > 0.0 && filter.p0_gyro_bias > 0.0)) {
    throw InputError("filter: initial standard deviations must be > 0");
  }
  measurement_stride();
}

std::size_t CampaignConfig::measurement_stride() const {
  if (!(filter.measurement_rate > 0.0)) {
    throw InputError("filter: measurement_rate must be > 0");
  }
  const double ratio = trajectory.rate / filter.measurement_rate;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9) {
    throw InputError("filter: measurement_rate must divide the trajectory rate");
  }
  return static_cast<std::size_t>(rounded);
}

std::string MethodSpec::name() const {
  return rule == UpdateRule::gaussian ? "ekf" : "coverage";
}

std::vector<MethodSpec> campaign_methods(const CampaignConfig& cfg) {
  std::vector<MethodSpec> methods;
  if (cfg.campaign.baseline) {
    MethodSpec m;
    m.rule = UpdateRule::gaussian;
    m.gamma = std::numeric_limits<double>::quiet_NaN();
    m.r = cfg.noise.total_covariance();
    methods.push_back(m);
  }
  for (double g : cfg.campaign.gammas) {
    MethodSpec m;
    m.rule = UpdateRule::coverage;
    m.gamma = g;
    m.epsilon = cfg.noise.coverage_radius(g);
    methods.push_back(m);
  }
  return methods;
}

TrialData make_trial_data(const CampaignConfig& cfg, const Truth& truth, std::size_t trial_index) {
  TrialData d;
  d.seed = derive_seed(cfg.campaign.seed, {trial_index});
  d.imu = synthesize_imu(truth, cfg.imu.noise, derive_seed(d.seed, {kImuStream}),
                         cfg.filter.gravity);
  d.measurements = synthesize_measurements(truth, cfg.noise,
                                           derive_seed(d.seed, {kMeasurementStream}),
                                           cfg.measurement_stride());
  d.initial_cov = cfg.filter.initial_covariance();

  Engine eng(derive_seed(d.seed, {kInitialErrorStream}));
  boost::random::normal_distribution<double> n01;
  ErrorVec xi;
  for (int i = 0; i < kErrorDim; ++i) {
    xi(i) = n01(eng);
  }
  xi = d.initial_cov.diagonal().cwiseSqrt().cwiseProduct(xi);
  const AugmentedState& x0 = truth.front().state;
  d.initial_estimate.nav = exp_se23(xi.head<kTangentDim>()) * x0.nav;
  d.initial_estimate.bias_accel = x0.bias_accel + xi.segment<3>(kAccelBiasIdx);
  d.initial_estimate.bias_gyro = x0.bias_gyro + xi.segment<3>(kGyroBiasIdx);
  return d;
}

double position_nees(const AugmentedState& estimate, const ErrorBelief& bel, const Se23& truth) {
  const Tangent9 xi = log_se23(estimate.nav * truth.inverse());
  const Vec3 e = xi.segment<3>(kPosIdx) - bel.mean.segment<3>(kPosIdx);
  const Mat3 p = bel.cov.block<3, 3>(kPosIdx, kPosIdx);
  return e.dot(p.ldlt().solve(e));
}

TrialResult run_trial(const CampaignConfig& cfg, const Truth& truth, const TrialData& data,
                      const MethodSpec& method) {
  TrialResult res;
  res.seed = data.seed;
  const std::size_t stride = cfg.measurement_stride();
  const ProcessNoise q =
      ProcessNoise::from_densities(cfg.imu.noise.accel, cfg.imu.noise.gyro,
                                   cfg.imu.accel_bias_walk, cfg.imu.gyro_bias_walk);
  ErrorBelief bel0;
  bel0.cov = data.initial_cov;
  InvariantFilter filter(data.initial_estimate, bel0, q, cfg.filter.gravity);
  const CoverageSpec spec{method.epsilon, method.gamma};

  double sq_err = 0.0;
  std::size_t n_updates = 0;
  std::size_t n_active = 0;
  res.nees_pos.reserve(truth.size());
  auto record = [&](std::size_t k) {
    const Vec3 dp = filter.state().nav.pos - truth[k].state.nav.pos;
    sq_err += dp.squaredNorm();
    res.nees_pos.push_back(position_nees(filter.state(), filter.belief(), truth[k].state.nav));
  };

  try {
    record(0);
    for (std::size_t k = 1; k < truth.size(); ++k) {
      filter.propagate(data.imu[k - 1]);
      if (k % stride == 0 && k / stride - 1 < data.measurements.size()) {
        const Vec3& meas = data.measurements[k / stride - 1].value;
        if (method.rule == UpdateRule::gaussian) {
          filter.update_gaussian(meas, method.r);
        } else {
          const UpdateDiagnostics diag = filter.update_coverage(
              meas, spec, cfg.filter.sampler, derive_seed(data.seed, {kSamplerStream, k}),
              kCampaignOptions);
          ++n_updates;
          n_active += diag.active;
        }
      }
      if (!is_finite(filter)) {
        throw NumericalError("non-finite filter state at step " + std::to_string(k));
      }
      record(k);
    }
  } catch (const std::exception& e) {
    res.diverged = true;
    res.failure = e.what();
    log::warn("trial seed {:#x} ({}) diverged: {}", data.seed, method.name(), e.what());
  }

  const auto n = static_cast<double>(res.nees_pos.size());
  res.rmse_pos = std::sqrt(sq_err / n);
  double nees_sum = 0.0;
  for (double v : res.nees_pos) {
    nees_sum += v;
  }
  res.nees_mean = nees_sum / n;
  res.frac_active = n_updates == 0 ? 0.0 : static_cast<double>(n_active) / n_updates;
  return res;
}

MethodSummary summarize(const MethodSpec& method, const std::vector<TrialResult>& trials) {
  MethodSummary s;
  s.method = method;
  std::vector<const TrialResult*> ok;
  for (const TrialResult& t : trials) {
    if (t.diverged) {
      ++s.n_diverged;
    } else {
      ok.push_back(&t);
    }
  }
  s.n_trials = ok.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (ok.empty()) {
    s.rmse_mean = s.rmse_std = s.nees_mean = s.nees_std = s.frac_active = nan;
    return s;
  }
  auto mean_std = [&](auto field, double& mean, double& sd) {
    double sum = 0.0;
    for (const TrialResult* t : ok) {
      sum += field(*t);
    }
    mean = sum / ok.size();
    double ss = 0.0;
    for (const TrialResult* t : ok) {
      ss += (field(*t) - mean) * (field(*t) - mean);
    }
    sd = ok.size() > 1 ? std::sqrt(ss / (ok.size() - 1)) : 0.0;
  };
  double unused = 0.0;
  mean_std([](const TrialResult& t) { return t.rmse_pos; }, s.rmse_mean, s.rmse_std);
  mean_std([](const TrialResult& t) { return t.nees_mean; }, s.nees_mean, s.nees_std);
  mean_std([](const TrialResult& t) { return t.frac_active; }, s.frac_active, unused);
  if (method.rule == UpdateRule::gaussian) {
    s.frac_active = nan;
  }
  return s;
}

CampaignResult run_monte_carlo(const CampaignConfig& cfg, unsigned jobs) {
  cfg.validate();
  const Truth truth = generate_truth(cfg.trajectory, cfg.imu.bias_accel, cfg.imu.bias_gyro);
  const std::vector<MethodSpec> methods = campaign_methods(cfg);
  const std::size_t n_trials = cfg.campaign.trials;

  CampaignResult out;
  out.trials.assign(methods.size(), std::vector<TrialResult>(n_trials));
  std::vector<std::exception_ptr> errors(n_trials);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < n_trials; i = next++) {
      try {
        const TrialData data = make_trial_data(cfg, truth, i);
        for (std::size_t m = 0; m < methods.size(); ++m) {
          out.trials[m][i] = run_trial(cfg, truth, data, methods[m]);
        }
        log::info("trial {}/{} done", i + 1, n_trials);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n_trials)));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) {
    pool.emplace_back(worker);
  }
  worker();
  for (std::thread& t : pool) {
    t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }

  for (std::size_t m = 0; m < methods.size(); ++m) {
    out.rows.push_back(summarize(methods[m], out.trials[m]));
    out.n_diverged += out.rows.back().n_diverged;
  }
  return out;
}

}  // namespace coverage_inekf
