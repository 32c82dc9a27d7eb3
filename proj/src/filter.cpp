#include "coverage_inekf/filter.hpp"

#include <stdexcept>

namespace coverage_inekf {

InvariantFilter::InvariantFilter(const AugmentedState& initial, const ErrorBelief& belief,
                                 const ProcessNoise& noise, const Vec3& gravity)
    : state_(initial), belief_(belief), noise_(noise), gravity_(gravity) {}

void InvariantFilter::propagate(const ImuSample& u) {
  if (!(u.dt > 0.0 && u.dt <= 0.1)) {
    throw std::invalid_argument("InvariantFilter::propagate: dt must be in (0, 0.1]");
  }
  // Transition uses the state at the start of the interval.
  const Transition tr = error_transition(state_, u, noise_, gravity_);
  state_ = propagate_mean(state_, u, gravity_);
  belief_ = propagate_cov(belief_, tr.phi, tr.q_d);
  count_composition();
}

void InvariantFilter::update_gaussian(const Vec3& meas, const Mat3& r) {
  UpdatedEstimate upd = gaussian_update(state_, belief_, meas, r);
  state_ = std::move(upd.state);
  belief_ = std::move(upd.belief);
  count_composition();
}

UpdateDiagnostics InvariantFilter::update_coverage(const Vec3& meas, const CoverageSpec& spec,
                                                   const SamplerConfig& sampler,
                                                   std::uint64_t seed,
                                                   const UpdateOptions& options) {
  CoverageUpdateResult res =
      coverage_update(state_, belief_, meas, spec, sampler, seed, options);
  if (res.diagnostics.active && !res.diagnostics.skipped) {
    state_ = std::move(res.state);
    belief_ = std::move(res.belief);
    count_composition();
  }
  return res.diagnostics;
}

void InvariantFilter::count_composition() {
  if (++compositions_ > kRenormalizeInterval) {
    state_.nav = state_.nav.renormalized();
    compositions_ = 0;
  }
}

}  // namespace coverage_inekf
