#include "coverage_inekf/campaign_config.hpp"

#include <Eigen/Geometry>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "coverage_inekf/csv.hpp"
#include "coverage_inekf/errors.hpp"

namespace coverage_inekf {
namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw InputError("expected a number, got '" + text + "'");
  }
  return v;
}

// Typed access to one INI section; every lookup is checked against the allowed keys so
// typos surface as errors instead of silently keeping defaults.
class Section {
 public:
  Section(const pt::ptree& root, std::string name, std::set<std::string> keys)
      : name_(std::move(name)), keys_(std::move(keys)) {
    if (const auto child = root.get_child_optional(name_)) {
      node_ = &*child;
      for (const auto& [key, value] : *node_) {
        if (!keys_.contains(key)) {
          fail(key, "unknown key");
        }
      }
    }
  }

  bool has(const std::string& key) const { return node_ && node_->get_child_optional(key); }

  std::string text(const std::string& key) const { return trim(node_->get<std::string>(key)); }

  void get(const std::string& key, double& out) const {
    if (has(key)) {
      try {
        out = parse_double(text(key));
      } catch (const InputError& e) {
        fail(key, e.what());
      }
    }
  }

  void get(const std::string& key, std::size_t& out) const {
    if (has(key)) {
      double v = 0.0;
      get(key, v);
      if (v < 0.0 || v != std::floor(v)) {
        fail(key, "expected a non-negative integer");
      }
      out = static_cast<std::size_t>(v);
    }
  }

  void get(const std::string& key, int& out) const {
    if (has(key)) {
      std::size_t v = 0;
      get(key, v);
      out = static_cast<int>(v);
    }
  }

  void get(const std::string& key, std::uint64_t& out, bool) const {
    if (has(key)) {
      const std::string t = text(key);
      const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
      if (ec != std::errc() || ptr != t.data() + t.size()) {
        fail(key, "expected an unsigned integer, got '" + t + "'");
      }
    }
  }

  void get(const std::string& key, bool& out) const {
    if (has(key)) {
      const std::string t = text(key);
      if (t == "true" || t == "1" || t == "yes") {
        out = true;
      } else if (t == "false" || t == "0" || t == "no") {
        out = false;
      } else {
        fail(key, "expected true or false, got '" + t + "'");
      }
    }
  }

  void get(const std::string& key, Vec3& out) const {
    if (has(key)) {
      const std::vector<double> v = list(key);
      if (v.size() != 3) {
        fail(key, "expected 3 numbers");
      }
      out = Vec3(v[0], v[1], v[2]);
    }
  }

  std::vector<double> list(const std::string& key) const {
    try {
      return parse_number_list(text(key));
    } catch (const InputError& e) {
      fail(key, e.what());
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw InputError("config [" + name_ + "] " + key + ": " + what);
  }

 private:
  const pt::ptree* node_ = nullptr;
  std::string name_;
  std::set<std::string> keys_;
};

pt::ptree read_ini(std::istream& in, const std::set<std::string>& sections) {
  pt::ptree root;
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  for (const auto& [name, child] : root) {
    if (!sections.contains(name)) {
      throw InputError("config: unknown section [" + name + "]");
    }
    if (child.empty() && !child.data().empty()) {
      throw InputError("config: key '" + name + "' outside any section");
    }
  }
  return root;
}

pt::ptree read_ini_file(const std::string& path, const std::set<std::string>& sections) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open config file '" + path + "'");
  }
  return read_ini(in, sections);
}

Mat3 diagonal_cov(const Vec3& sd) { return sd.cwiseProduct(sd).asDiagonal(); }

// Accepts one value (isotropic) or three (per axis).
Vec3 axis_values(const Section& s, const std::string& key, const Vec3& fallback) {
  if (!s.has(key)) {
    return fallback;
  }
  const std::vector<double> v = s.list(key);
  if (v.size() == 1) {
    return Vec3::Constant(v[0]);
  }
  if (v.size() == 3) {
    return Vec3(v[0], v[1], v[2]);
  }
  s.fail(key, "expected 1 or 3 numbers");
}

CampaignConfig build_campaign(const pt::ptree& root) {
  CampaignConfig cfg;

  const Section traj(root, "trajectory",
                     {"pattern", "duration", "rate", "speed", "size", "gait_frequency",
                      "bob_amplitude", "sway_amplitude"});
  if (traj.has("pattern")) {
    try {
      cfg.trajectory.pattern = parse_pattern(traj.text("pattern"));
    } catch (const InputError& e) {
      traj.fail("pattern", e.what());
    }
  }
  traj.get("duration", cfg.trajectory.duration);
  traj.get("rate", cfg.trajectory.rate);
  traj.get("speed", cfg.trajectory.speed);
  traj.get("size", cfg.trajectory.size);
  traj.get("gait_frequency", cfg.trajectory.gait_frequency);
  traj.get("bob_amplitude", cfg.trajectory.bob_amplitude);
  traj.get("sway_amplitude", cfg.trajectory.sway_amplitude);

  const Section imu(root, "imu",
                    {"accel_noise", "gyro_noise", "accel_bias_walk", "gyro_bias_walk",
                     "accel_bias", "gyro_bias"});
  imu.get("accel_noise", cfg.imu.noise.accel);
  imu.get("gyro_noise", cfg.imu.noise.gyro);
  imu.get("accel_bias_walk", cfg.imu.accel_bias_walk);
  imu.get("gyro_bias_walk", cfg.imu.gyro_bias_walk);
  imu.get("accel_bias", cfg.imu.bias_accel);
  imu.get("gyro_bias", cfg.imu.bias_gyro);

  const Section noise(root, "noise",
                      {"model", "sigma", "mixture_means", "mixture_sigma", "mixture_weights"});
  const std::string model = noise.has("model") ? noise.text("model") : "gaussian";
  if (model == "gaussian") {
    cfg.noise.variant = GaussianNoise{diagonal_cov(axis_values(noise, "sigma", Vec3::Constant(0.1)))};
  } else if (model == "mixture") {
    FixedComponentMixture mix =
        std::get<FixedComponentMixture>(NoiseModel::default_mixture().variant);
    if (noise.has("mixture_means")) {
      mix.components.clear();
      std::stringstream ss(noise.text("mixture_means"));
      std::string item;
      while (std::getline(ss, item, ';')) {
        std::vector<double> v;
        try {
          v = parse_number_list(item);
        } catch (const InputError& e) {
          noise.fail("mixture_means", e.what());
        }
        if (v.size() != 3) {
          noise.fail("mixture_means", "each component mean needs 3 numbers (separate with ';')");
        }
        mix.components.push_back({0.0, Vec3(v[0], v[1], v[2]), Mat3::Identity()});
      }
      for (MixtureComponent& c : mix.components) {
        c.weight = 1.0 / static_cast<double>(mix.components.size());
      }
    }
    const Vec3 sd = axis_values(noise, "mixture_sigma", Vec3::Constant(0.05));
    for (MixtureComponent& c : mix.components) {
      c.cov = diagonal_cov(sd);
    }
    if (noise.has("mixture_weights")) {
      const std::vector<double> w = noise.list("mixture_weights");
      if (w.size() != mix.components.size()) {
        noise.fail("mixture_weights", "need one weight per component");
      }
      for (std::size_t i = 0; i < w.size(); ++i) {
        mix.components[i].weight = w[i];
      }
    }
    cfg.noise.variant = std::move(mix);
  } else {
    noise.fail("model", "expected gaussian or mixture, got '" + model + "'");
  }

  const Section filt(root, "filter",
                     {"p0_rot", "p0_vel", "p0_pos", "p0_accel_bias", "p0_gyro_bias",
                      "measurement_rate", "n_samples", "n_shifts"});
  filt.get("p0_rot", cfg.filter.p0_rot);
  filt.get("p0_vel", cfg.filter.p0_vel);
  filt.get("p0_pos", cfg.filter.p0_pos);
  filt.get("p0_accel_bias", cfg.filter.p0_accel_bias);
  filt.get("p0_gyro_bias", cfg.filter.p0_gyro_bias);
  filt.get("measurement_rate", cfg.filter.measurement_rate);
  filt.get("n_samples", cfg.filter.sampler.n_samples);
  filt.get("n_shifts", cfg.filter.sampler.n_shifts);
  if (cfg.filter.sampler.n_samples < 100) {
    filt.fail("n_samples", "must be >= 100");
  }
  if (cfg.filter.sampler.n_shifts < 2 ||
      cfg.filter.sampler.n_shifts > cfg.filter.sampler.n_samples) {
    filt.fail("n_shifts", "must be in [2, n_samples]");
  }

  const Section camp(root, "campaign", {"trials", "seed", "gammas", "baseline"});
  camp.get("trials", cfg.campaign.trials);
  camp.get("seed", cfg.campaign.seed, true);
  camp.get("baseline", cfg.campaign.baseline);
  if (camp.has("gammas")) {
    cfg.campaign.gammas = camp.list("gammas");
  }
  if (cfg.campaign.trials < 1) {
    camp.fail("trials", "must be >= 1");
  }

  try {
    cfg.validate();
  } catch (const InputError& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  return cfg;
}

const std::set<std::string> kCampaignSections{"trajectory", "imu", "noise", "filter", "campaign"};

}  // namespace

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::string token;
  std::stringstream ss(text);
  std::string piece;
  while (ss >> piece) {
    std::stringstream inner(piece);
    while (std::getline(inner, token, ',')) {
      if (!token.empty()) {
        out.push_back(parse_double(token));
      }
    }
  }
  if (out.empty()) {
    throw InputError("expected a list of numbers, got '" + text + "'");
  }
  return out;
}

CampaignConfig parse_campaign_config(const std::string& text) {
  std::istringstream in(text);
  return build_campaign(read_ini(in, kCampaignSections));
}

CampaignConfig load_campaign_config(const std::string& path) {
  return build_campaign(read_ini_file(path, kCampaignSections));
}

ReplayBundle load_replay_bundle(const std::string& path) {
  const pt::ptree root = read_ini_file(
      path, {"replay", "initial", "initial_std", "imu", "gaussian", "coverage"});
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return (fp.is_absolute() ? fp : base / fp).string();
  };

  ReplayBundle b;
  const Section rep(root, "replay", {"imu", "measurements", "update", "seed", "gravity",
                                     "n_samples", "n_shifts"});
  if (!rep.has("imu")) {
    rep.fail("imu", "missing");
  }
  if (!rep.has("measurements")) {
    rep.fail("measurements", "missing");
  }
  b.imu_path = resolve(rep.text("imu"));
  b.measurement_path = resolve(rep.text("measurements"));
  for (const std::string* p : {&b.imu_path, &b.measurement_path}) {
    if (!std::filesystem::exists(*p)) {
      throw InputError("replay: file '" + *p + "' does not exist");
    }
  }
  if (rep.has("update")) {
    const std::string u = rep.text("update");
    if (u == "gaussian") {
      b.rule = UpdateRule::gaussian;
    } else if (u == "coverage") {
      b.rule = UpdateRule::coverage;
    } else {
      rep.fail("update", "expected gaussian or coverage, got '" + u + "'");
    }
  }
  rep.get("seed", b.seed, true);
  rep.get("gravity", b.gravity);
  rep.get("n_samples", b.sampler.n_samples);
  rep.get("n_shifts", b.sampler.n_shifts);

  const Section init(root, "initial",
                     {"quaternion", "velocity", "position", "accel_bias", "gyro_bias"});
  if (init.has("quaternion")) {
    const std::vector<double> q = init.list("quaternion");
    if (q.size() != 4) {
      init.fail("quaternion", "expected w, x, y, z");
    }
    const Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
    if (quat.norm() < 1e-9) {
      init.fail("quaternion", "zero quaternion");
    }
    b.initial.nav.rot = quat.normalized().toRotationMatrix();
  }
  init.get("velocity", b.initial.nav.vel);
  init.get("position", b.initial.nav.pos);
  init.get("accel_bias", b.initial.bias_accel);
  init.get("gyro_bias", b.initial.bias_gyro);

  FilterSettings sd;
  const Section istd(root, "initial_std", {"rot", "vel", "pos", "accel_bias", "gyro_bias"});
  istd.get("rot", sd.p0_rot);
  istd.get("vel", sd.p0_vel);
  istd.get("pos", sd.p0_pos);
  istd.get("accel_bias", sd.p0_accel_bias);
  istd.get("gyro_bias", sd.p0_gyro_bias);
  b.initial_cov = sd.initial_covariance();

  ImuSettings imu;
  const Section isec(root, "imu",
                     {"accel_noise", "gyro_noise", "accel_bias_walk", "gyro_bias_walk"});
  isec.get("accel_noise", imu.noise.accel);
  isec.get("gyro_noise", imu.noise.gyro);
  isec.get("accel_bias_walk", imu.accel_bias_walk);
  isec.get("gyro_bias_walk", imu.gyro_bias_walk);
  b.noise = ProcessNoise::from_densities(imu.noise.accel, imu.noise.gyro, imu.accel_bias_walk,
                                         imu.gyro_bias_walk);

  const Section gauss(root, "gaussian", {"sigma"});
  b.r = diagonal_cov(axis_values(gauss, "sigma", Vec3::Constant(0.1)));

  const Section cov(root, "coverage", {"bounds", "epsilon", "gamma"});
  if (cov.has("bounds")) {
    const CoverageBounds cb = read_bounds_document(resolve(cov.text("bounds")));
    b.coverage.epsilon = cb.epsilon;
    b.coverage.gamma = cb.gamma;
  }
  cov.get("epsilon", b.coverage.epsilon);
  cov.get("gamma", b.coverage.gamma);
  if (b.rule == UpdateRule::coverage) {
    try {
      b.coverage.validate();
    } catch (const std::invalid_argument& e) {
      cov.fail("epsilon/gamma", e.what());
    }
  }
  return b;
}

}  // namespace coverage_inekf
