#pragma once

#include "midl/tabular/bounds.hpp"

#include <cstdint>
#include <string>

namespace midl::tabular {

/// Shared knobs for the randomized theorem suites. Every instance is a pure
/// function of (seed, options).
struct SuiteOptions {
  int states = 5;
  int actions = 3;
  double discount = 0.9;
  double f = 0.5;
  /// Weight of the random row mixed into each learned-model transition row,
  /// and the half-width of the uniform reward error.
  double model_noise = 0.1;
  /// Transitions sampled to build the empirical MDP (Theorem 3).
  int empirical_samples = 200;
  double lambda = 1.0;
};

struct Theorem1Instance {
  std::uint64_t seed = 0;
  double premise_scale = 0;  // sum_a omega(s,a) = scale * xi(s) * sum_a d(s,a)
  bool unsatisfiable = false;
  double delta_l = 0;
  double lambda = 0;
  bool premise_all = false;
  bool lambda_ok = false;
  double min_margin = 0;  // min_s V(s) - V_hat(s)
  bool converged = false;
  int iterations = 0;
  double max_contraction = 0;
  bool holds = false;  // implication premise && lambda >= delta_l => V_hat <= V + 1e-8
};

/// Instance built to satisfy the lower-bound premise with lambda = delta_l:
/// M random, empirical MDP equal to M (no sampling error), learned MDP a
/// perturbation of M. omega is left unnormalised because the premise cannot
/// hold at every state when omega and d both sum to one.
Theorem1Instance run_theorem1_instance(std::uint64_t seed, const SuiteOptions& opt = {});

enum class Theorem2Family {
  /// Learned policy rows ~ Dirichlet(0.3), so d^pi_{M_hat} is concentrated;
  /// omega proportional to the exact per-pair model error.
  Concentrated,
  /// Learned policy rows ~ Dirichlet(1); omega proportional to the model error.
  General,
};

const char* family_name(Theorem2Family family);
Theorem2Family family_from_name(const std::string& name);

struct Theorem2Instance {
  std::uint64_t seed = 0;
  bool omega_equals_rho = false;
  double kappa1 = 0, kappa2 = 0;
  double flag_lhs = 0, flag_rhs = 0;
  bool flag = false;
  bool holds = false;  // flag => kappa1 > kappa2 (or |kappa1 - kappa2| <= 1e-10 when omega = rho)
};

Theorem2Instance run_theorem2_instance(std::uint64_t seed, Theorem2Family family, bool omega_equals_rho,
                                       const SuiteOptions& opt = {});

struct Theorem3Instance {
  std::uint64_t seed = 0;
  SafetyReport<double> report;
  double c_r = 0, c_t = 0;
};

/// Empirical MDP from `empirical_samples` behaviour transitions with exact
/// sampling constants, perturbed learned MDP, omega proportional to the exact
/// model error, pi_star from penalized policy iteration with eta held fixed.
Theorem3Instance run_theorem3_instance(std::uint64_t seed, const SuiteOptions& opt = {});

}  // namespace midl::tabular
