#pragma once

#include <cstdint>

#include "coverage_inekf/inekf_core.hpp"
#include "coverage_inekf/tmvn.hpp"

namespace coverage_inekf {

/// P(|e| <= epsilon) >= gamma for the body-velocity prediction error e.
struct CoverageSpec {
  Vec3 epsilon = Vec3::Zero();  // m/s, elementwise >= 0
  double gamma = 0.8;           // in (0, 1)

  /// Throws std::invalid_argument on negative radii or gamma outside (0, 1).
  void validate() const;
};

/// Error states with lower <= H deltaX <= upper.
struct FeasibleSet {
  VelocityJacobian h;
  Vec3 lower;
  Vec3 upper;
};

FeasibleSet build_feasible_set(const AugmentedState& prior, const Vec3& meas,
                               const CoverageSpec& spec);

/// Prior pushed through H, plus the gain that lifts z-space changes back to 15 dims.
struct ProjectedPrior {
  Vec3 mean_z;
  Mat3 cov_z;  // S = H Sigma H^T
  Eigen::Matrix<double, kErrorDim, 3> gain;  // K = Sigma H^T S^-1
};

/// Condition number of S above which the prior is treated as collapsed.
inline constexpr double kMaxInnovationCondition = 1e12;

/// Throws NumericalError (message carries the condition number) when S is near singular.
ProjectedPrior project_prior(const ErrorBelief& bel, const FeasibleSet& fs);

/// Speed knobs for long campaigns. The defaults estimate every reported quantity.
struct UpdateOptions {
  /// Skip the estimator when the Bonferroni bound 1 - sum_j P(z_j outside) already
  /// certifies pi_t >= gamma; pi_t is then reported as that lower bound.
  bool screen_with_bound = false;
  /// Estimate pi_t^+ after an active update (diagnostic only); NaN when off.
  bool posterior_mass = true;
};

struct ZPosterior {
  Vec3 mean;
  Mat3 cov;
  double prior_mass = 0.0;            // pi_t
  double prior_mass_std_error = 0.0;
  double posterior_mass = 0.0;        // pi_t^+ (equals pi_t when inactive)
  double posterior_mass_std_error = 0.0;
  bool active = false;                // pi_t < gamma
  bool outlier = false;               // pi_t <= kProbFloor; update must be skipped
  bool heavy_complement = false;      // 1 - pi_t < 1e-6: complement weight is amplified
  bool screened = false;              // decided inactive by the bound alone
};

/// KL-minimal posterior of the set-mass constraint, moment matched to a Gaussian.
/// Returns the prior unchanged when pi_t >= gamma or when pi_t is below the outlier floor.
ZPosterior kl_coverage_posterior(const Vec3& mean_z, const Mat3& cov_z, const FeasibleSet& fs,
                                 double gamma, const SamplerConfig& sampler, std::uint64_t seed,
                                 const UpdateOptions& options = {});

/// Replaces the z-marginal of the prior by the posterior while keeping the prior
/// conditional, then applies the mean on-manifold and resets it to zero.
/// Throws NumericalError if the lifted covariance has an eigenvalue below -1e-8.
UpdatedEstimate lift_and_apply(const AugmentedState& x, const ErrorBelief& bel,
                               const ZPosterior& zpost, const ProjectedPrior& proj);

struct UpdateDiagnostics {
  double pi_prior = 0.0;
  double pi_post = 0.0;
  bool active = false;
  bool skipped = false;
  bool heavy_complement = false;
};

struct CoverageUpdateResult {
  AugmentedState state;
  ErrorBelief belief;
  UpdateDiagnostics diagnostics;
};

/// Coverage-constrained measurement update. An inactive or outlier update returns the
/// inputs bit-for-bit.
CoverageUpdateResult coverage_update(const AugmentedState& x, const ErrorBelief& bel,
                                     const Vec3& meas, const CoverageSpec& spec,
                                     const SamplerConfig& sampler, std::uint64_t seed,
                                     const UpdateOptions& options = {});

}  // namespace coverage_inekf
