#include "midl/tabular/suites.hpp"

namespace midl::tabular {

namespace {

double reward_bound(std::initializer_list<const TabularMdp<double>*> mdps) {
  double r = 0;
  for (const auto* m : mdps) r = std::max(r, max_abs_reward(*m));
  return r;
}

}  // namespace

Theorem1Instance run_theorem1_instance(std::uint64_t seed, const SuiteOptions& opt) {
  Rng rng(seed);
  const auto truth = random_mdp<double>(opt.states, opt.actions, opt.discount, rng);
  const auto model = perturb_mdp(truth, opt.model_noise, opt.model_noise, rng);
  const auto pi = random_policy<double>(opt.states, opt.actions, 1.0, rng);
  const auto pi_b = random_policy<double>(opt.states, opt.actions, 1.0, rng);
  auto occ = make_occupancy_tables(truth, model, pi, pi_b, opt.f);

  Theorem1Instance out;
  out.seed = seed;
  out.premise_scale = std::uniform_real_distribution<double>(1.01, 3.0)(rng);
  const Vector x = xi<double>(occ.behavior_state(), occ.model_state(), pi, pi_b, opt.f);
  const Vector d_s = occ.data_state();
  for (int s = 0; s < opt.states; ++s)
    occ.omega.row(s) = out.premise_scale * x(s) * d_s(s) * dirichlet<double>(opt.actions, 1.0, rng).transpose();

  const Matrix counts = Matrix::Zero(opt.states, opt.actions);
  const auto constants = model_error_constants(truth, model, counts, reward_bound({&truth, &model}));
  try {
    out.delta_l = delta_l(constants, occ, x, pi, pi_b, opt.f, opt.discount);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Unsatisfiable) throw;
    out.unsatisfiable = true;
    return out;
  }
  out.lambda = out.delta_l;
  const auto rep = check_theorem1(truth, truth, model, pi, pi_b, occ, opt.f, out.lambda, constants);
  out.premise_all = rep.premise_all;
  out.lambda_ok = rep.lambda_ok;
  out.min_margin = (rep.v - rep.v_hat).minCoeff();
  out.converged = rep.fixed_point.converged;
  out.iterations = rep.fixed_point.iterations;
  out.max_contraction = rep.fixed_point.max_contraction;
  out.holds = rep.implication_holds;
  return out;
}

const char* family_name(Theorem2Family family) {
  return family == Theorem2Family::Concentrated ? "concentrated" : "general";
}

Theorem2Family family_from_name(const std::string& name) {
  if (name == "concentrated") return Theorem2Family::Concentrated;
  if (name == "general") return Theorem2Family::General;
  throw Error(ErrorCode::Argument, "unknown instance family '" + name + "' (expected concentrated|general)");
}

Theorem2Instance run_theorem2_instance(std::uint64_t seed, Theorem2Family family, bool omega_equals_rho,
                                       const SuiteOptions& opt) {
  Rng rng(seed);
  const double concentration = family == Theorem2Family::Concentrated ? 0.3 : 1.0;
  const auto truth = random_mdp<double>(opt.states, opt.actions, opt.discount, rng);
  const auto pi = random_policy<double>(opt.states, opt.actions, concentration, rng);
  const auto pi_b = random_policy<double>(opt.states, opt.actions, 1.0, rng);
  const auto empirical = empirical_mdp(truth, pi_b, 1000, rng);
  const auto model = perturb_mdp(truth, opt.model_noise, opt.model_noise, rng);
  auto occ = make_occupancy_tables(truth, model, pi, pi_b, opt.f);
  const auto constants = model_error_constants(truth, model, empirical.counts, 1.0);
  occ.omega = omega_equals_rho ? occ.rho : Matrix(constants.tv / constants.tv.sum());

  const auto rep = check_theorem2(empirical.mdp, model, pi, occ, occ.data_state(), opt.f, opt.lambda);
  Theorem2Instance out;
  out.seed = seed;
  out.omega_equals_rho = omega_equals_rho;
  out.kappa1 = rep.kappa1;
  out.kappa2 = rep.kappa2;
  out.flag_lhs = rep.flag_lhs;
  out.flag_rhs = rep.flag_rhs;
  out.flag = rep.flag;
  out.holds = omega_equals_rho ? std::abs(rep.kappa1 - rep.kappa2) <= 1e-10 : rep.implication_holds;
  return out;
}

Theorem3Instance run_theorem3_instance(std::uint64_t seed, const SuiteOptions& opt) {
  Rng rng(seed);
  const auto truth = random_mdp<double>(opt.states, opt.actions, opt.discount, rng);
  const auto pi_b = random_policy<double>(opt.states, opt.actions, 1.0, rng);
  const auto empirical = empirical_mdp(truth, pi_b, opt.empirical_samples, rng);
  const auto model = perturb_mdp(truth, opt.model_noise, opt.model_noise, rng);
  // d_beta is taken at the behaviour policy and held fixed while pi_star is optimised.
  auto occ = make_occupancy_tables(truth, model, pi_b, pi_b, opt.f);
  auto constants =
      model_error_constants(truth, model, empirical.counts, reward_bound({&truth, &model, &empirical.mdp}));
  set_exact_sampling_constants(constants, truth, empirical.mdp);
  occ.omega = constants.tv / constants.tv.sum();

  const Matrix eta = domain_penalty(occ.omega, occ.data, occ.beta);
  const auto pi_star = penalized_policy_iteration(mix(empirical.mdp, model, opt.f), eta, opt.lambda, pi_b);
  Theorem3Instance out;
  out.seed = seed;
  out.report = safety_diagnostic(truth, empirical.mdp, model, pi_star, pi_b, occ, opt.f, opt.lambda, constants);
  out.c_r = constants.c_r;
  out.c_t = constants.c_t;
  return out;
}

}  // namespace midl::tabular
