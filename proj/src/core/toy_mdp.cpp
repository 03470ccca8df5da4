#include "midl/core/toy_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace midl::core {

int toy_interval(double a) {
  if (!(a >= -1.0 && a <= 1.0)) {
    throw Error(ErrorCode::Domain, "toy action " + format_real(a) + " outside [-1, 1]");
  }
  const auto& bp = ToyMdpSpec::kBreakpoints;
  for (int k = 0; k < 4; ++k) {
    if (a < bp[k + 1]) return k;
  }
  return 4;
}

MeanSigma toy_mean_sigma(double a) {
  const int k = toy_interval(a);
  double mean = 0;
  switch (k) {
    case 0: mean = -a + 0.2; break;
    case 1: mean = 5.0 * (a + 0.4) * (a + 0.4) + 0.6; break;
    case 2: mean = -5.0 * a * a + 1.0; break;
    case 3: mean = 10.0 * (a - 0.4) * (a - 0.4) + 0.4; break;
    default: mean = a + 0.2; break;
  }
  return {mean, ToyMdpSpec::kSigma[static_cast<std::size_t>(k)]};
}

Transition toy_step(double state, double action, Rng& rng, double noise_scale) {
  const auto [mean, sigma] = toy_mean_sigma(action);
  std::normal_distribution<double> noise(0.0, 1.0);
  Transition t;
  t.state = Vector::Constant(1, state);
  t.action = Vector::Constant(1, action);
  t.reward = toy_reward(state, action);
  t.next_state = Vector::Constant(1, mean + noise_scale * sigma * noise(rng));
  t.terminal = false;
  return t;
}

OfflineDataset generate_toy_dataset(const ToyMdpSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> initial(spec.initial_lo, spec.initial_hi);
  std::normal_distribution<double> behavior(spec.behavior_mean, spec.behavior_std);
  std::vector<Transition> rows;
  rows.reserve(spec.dataset_size);
  for (std::size_t i = 0; i < spec.dataset_size; ++i) {
    const double s0 = initial(rng);
    const double a = std::clamp(behavior(rng), spec.action_lo, spec.action_hi);
    rows.push_back(toy_step(s0, a, rng));
  }
  DatasetMetadata meta{"clipped-gaussian(mean=" + format_real(spec.behavior_mean) +
                           ",std=" + format_real(spec.behavior_std) + ")",
                       seed, rows.size()};
  return OfflineDataset(std::move(rows), std::move(meta));
}

double behavior_density(const ToyMdpSpec& spec, double a) {
  if (a <= spec.action_lo || a >= spec.action_hi) return 0.0;
  const double z = (a - spec.behavior_mean) / spec.behavior_std;
  return std::exp(-0.5 * z * z) / (spec.behavior_std * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace midl::core
