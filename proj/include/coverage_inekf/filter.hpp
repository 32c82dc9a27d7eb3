#pragma once

#include <cstdint>

#include "coverage_inekf/coverage_update.hpp"
#include "coverage_inekf/inekf_core.hpp"

namespace coverage_inekf {

/// Right-invariant EKF instance: IMU propagation plus either measurement update.
/// Not thread-safe; one writer per instance.
class InvariantFilter {
 public:
  InvariantFilter(const AugmentedState& initial, const ErrorBelief& belief,
                  const ProcessNoise& noise, const Vec3& gravity = kDefaultGravity);

  /// Throws std::invalid_argument unless dt is in (0, 0.1].
  void propagate(const ImuSample& u);

  void update_gaussian(const Vec3& meas, const Mat3& r);

  UpdateDiagnostics update_coverage(const Vec3& meas, const CoverageSpec& spec,
                                    const SamplerConfig& sampler, std::uint64_t seed,
                                    const UpdateOptions& options = {});

  const AugmentedState& state() const { return state_; }
  const ErrorBelief& belief() const { return belief_; }
  const Vec3& gravity() const { return gravity_; }

 private:
  void count_composition();

  AugmentedState state_;
  ErrorBelief belief_;
  ProcessNoise noise_;
  Vec3 gravity_;
  int compositions_ = 0;
};

}  // namespace coverage_inekf
