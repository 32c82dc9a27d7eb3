#include "coverage_inekf/coverage_update.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "coverage_inekf/errors.hpp"
#include "coverage_inekf/log.hpp"
#include "coverage_inekf/rng.hpp"

namespace coverage_inekf {

namespace {

constexpr double kEigenFloor = 1e-12;
constexpr double kPsdTolerance = -1e-8;
constexpr double kHeavyComplement = 1e-6;

BoxRegion to_box(const FeasibleSet& fs) {
  return {Eigen::VectorXd(fs.lower), Eigen::VectorXd(fs.upper)};
}

}  // namespace

void CoverageSpec::validate() const {
  if (!(epsilon.array() >= 0.0).all() || !epsilon.allFinite()) {
    throw std::invalid_argument("CoverageSpec: epsilon must be finite and >= 0");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("CoverageSpec: gamma must be in (0, 1)");
  }
}

FeasibleSet build_feasible_set(const AugmentedState& prior, const Vec3& meas,
                               const CoverageSpec& spec) {
  spec.validate();
  const Vec3 center = meas - predicted_body_velocity(prior);
  return {body_velocity_jacobian(prior), center - spec.epsilon, center + spec.epsilon};
}

ProjectedPrior project_prior(const ErrorBelief& bel, const FeasibleSet& fs) {
  ProjectedPrior out;
  out.mean_z = fs.h * bel.mean;
  const Eigen::Matrix<double, kErrorDim, 3> sigma_ht = bel.cov * fs.h.transpose();
  out.cov_z = symmetrized(fs.h * sigma_ht);

  Eigen::SelfAdjointEigenSolver<Mat3> eig(out.cov_z, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(cond < kMaxInnovationCondition)) {
    std::ostringstream msg;
    msg << "project_prior: projected covariance is near singular (condition number " << cond
        << ")";
    throw NumericalError(msg.str());
  }
  out.gain = out.cov_z.ldlt().solve(sigma_ht.transpose()).transpose();
  return out;
}

ZPosterior kl_coverage_posterior(const Vec3& mean_z, const Mat3& cov_z, const FeasibleSet& fs,
                                 double gamma, const SamplerConfig& sampler, std::uint64_t seed,
                                 const UpdateOptions& options) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("kl_coverage_posterior: gamma must be in (0, 1)");
  }
  ZPosterior out;
  out.mean = mean_z;
  out.cov = cov_z;
  if (options.screen_with_bound) {
    double outside = 0.0;
    for (int j = 0; j < 3; ++j) {
      const double sd = std::sqrt(cov_z(j, j));
      outside += normal_cdf((fs.lower(j) - mean_z(j)) / sd) +
                 normal_cdf((mean_z(j) - fs.upper(j)) / sd);
    }
    if (1.0 - outside >= gamma) {
      out.prior_mass = out.posterior_mass = 1.0 - outside;
      out.screened = true;
      return out;
    }
  }

  const Eigen::VectorXd mu = mean_z;
  const Eigen::MatrixXd cov = cov_z;
  const BoxRegion box = to_box(fs);
  const TruncatedMoments tm = box_moments(mu, cov, box, sampler, seed);
  out.prior_mass = tm.prob;
  out.prior_mass_std_error = tm.prob_std_error;
  out.posterior_mass = tm.prob;
  out.posterior_mass_std_error = tm.prob_std_error;
  if (tm.degenerate || tm.prob <= kProbFloor) {
    out.outlier = true;
    return out;
  }
  if (tm.prob >= gamma) {
    return out;
  }
  out.active = true;
  out.heavy_complement = 1.0 - tm.prob < kHeavyComplement;

  // Complement moments from the law of total expectation, then the mixture with
  // weights gamma / (1 - gamma).
  const double pi = tm.prob;
  const Vec3 mean_in = tm.mean;
  const Mat3 second_in = tm.second_moment;
  const Mat3 second_prior = cov_z + mean_z * mean_z.transpose();
  const Vec3 mean_out = (mean_z - pi * mean_in) / (1.0 - pi);
  const Mat3 second_out = (second_prior - pi * second_in) / (1.0 - pi);

  const Vec3 mean_post = gamma * mean_in + (1.0 - gamma) * mean_out;
  const Mat3 second_post = gamma * second_in + (1.0 - gamma) * second_out;
  out.mean = mean_post;
  out.cov = symmetrized(second_post - mean_post * mean_post.transpose());

  if (!options.posterior_mass) {
    out.posterior_mass = std::numeric_limits<double>::quiet_NaN();
    out.posterior_mass_std_error = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  try {
    const BoxProbability post = box_probability(Eigen::VectorXd(out.mean),
                                                Eigen::MatrixXd(out.cov), box, sampler,
                                                derive_seed(seed, {1}));
    out.posterior_mass = post.prob;
    out.posterior_mass_std_error = post.std_error;
  } catch (const NumericalError&) {
    // Posterior marginal collapsed to (numerically) rank deficient; mass is undefined.
    out.posterior_mass = std::numeric_limits<double>::quiet_NaN();
    out.posterior_mass_std_error = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

UpdatedEstimate lift_and_apply(const AugmentedState& x, const ErrorBelief& bel,
                               const ZPosterior& zpost, const ProjectedPrior& proj) {
  const ErrorVec mean = bel.mean + proj.gain * (zpost.mean - proj.mean_z);
  ErrorCov cov =
      symmetrized(bel.cov + proj.gain * (zpost.cov - proj.cov_z) * proj.gain.transpose());

  Eigen::SelfAdjointEigenSolver<ErrorCov> eig(cov);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (!(min_eig >= kPsdTolerance)) {
    std::ostringstream msg;
    msg << "lift_and_apply: lifted covariance is not PSD (min eigenvalue " << min_eig << ")";
    throw NumericalError(msg.str());
  }
  if (min_eig < kEigenFloor) {
    const ErrorVec clipped = eig.eigenvalues().cwiseMax(kEigenFloor);
    cov = symmetrized(eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose());
  }

  UpdatedEstimate out;
  out.state = apply_correction(x, mean);
  out.belief.mean.setZero();
  out.belief.cov = cov;
  return out;
}

CoverageUpdateResult coverage_update(const AugmentedState& x, const ErrorBelief& bel,
                                     const Vec3& meas, const CoverageSpec& spec,
                                     const SamplerConfig& sampler, std::uint64_t seed,
                                     const UpdateOptions& options) {
  const FeasibleSet fs = build_feasible_set(x, meas, spec);
  const ProjectedPrior proj = project_prior(bel, fs);
  const ZPosterior zpost =
      kl_coverage_posterior(proj.mean_z, proj.cov_z, fs, spec.gamma, sampler, seed, options);

  CoverageUpdateResult out{x, bel, {}};
  out.diagnostics.pi_prior = zpost.prior_mass;
  out.diagnostics.pi_post = zpost.posterior_mass;
  out.diagnostics.active = zpost.active;
  out.diagnostics.heavy_complement = zpost.heavy_complement;
  if (zpost.outlier) {
    out.diagnostics.skipped = true;
    log::debug("coverage update skipped: prior set mass {:.3g} below floor", zpost.prior_mass);
    return out;
  }
  if (!zpost.active) {
    return out;
  }
  if (zpost.heavy_complement) {
    log::debug("coverage update: complement mass {:.3g} amplifies tail weight",
               1.0 - zpost.prior_mass);
  }
  UpdatedEstimate upd = lift_and_apply(x, bel, zpost, proj);
  out.state = std::move(upd.state);
  out.belief = std::move(upd.belief);
  return out;
}

}  // namespace coverage_inekf
