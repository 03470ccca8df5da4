#pragma once

#include "midl/core/dataset.hpp"

#include <array>
#include <cstdint>

namespace midl::core {

struct MeanSigma {
  double mean;
  double sigma;
};

/// One-dimensional benchmark MDP: the next state is Gaussian with a piecewise
/// mean/std in the action and independent of the current state; the reward is
/// the current state. Action intervals are half-open [lo, hi) except the last,
/// which is closed.
struct ToyMdpSpec {
  static constexpr std::array<double, 6> kBreakpoints{-1.0, -0.6, -0.2, 0.2, 0.6, 1.0};
  static constexpr std::array<double, 5> kSigma{0.06, 0.04, 0.02, 0.04, 0.06};

  double action_lo = -1.0;
  double action_hi = 1.0;
  double behavior_mean = 0.0;
  double behavior_std = 0.35;
  std::size_t dataset_size = 1000;
  /// Initial states are drawn from Uniform[initial_lo, initial_hi].
  double initial_lo = 0.0;
  double initial_hi = 1.0;
};

/// Index of the Table interval owning `action`; throws ErrorCode::Domain outside [-1, 1].
int toy_interval(double action);

MeanSigma toy_mean_sigma(double action);

/// Samples one transition. `noise_scale` multiplies sigma (0 gives the mean).
Transition toy_step(double state, double action, Rng& rng, double noise_scale = 1.0);

/// Reward R(s, a) = s.
inline double toy_reward(double state, double /*action*/) { return state; }

/// Offline data from the clipped Gaussian behaviour policy, one step per
/// episode with s0 ~ Uniform[initial_lo, initial_hi].
OfflineDataset generate_toy_dataset(const ToyMdpSpec& spec, std::uint64_t seed);

/// Density of the clipped-Gaussian behaviour policy restricted to the open
/// interior of the action box (the clip puts point masses on the edges).
double behavior_density(const ToyMdpSpec& spec, double action);

}  // namespace midl::core
