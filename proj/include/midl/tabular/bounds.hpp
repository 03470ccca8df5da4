#pragma once

#include "midl/tabular/backup.hpp"

#include <limits>
#include <optional>
#include <type_traits>
#include <vector>

namespace midl::tabular {

/// Ratio of the largest to the smallest per-action mixture weight
///   (1-f) d^{pi_b}(s) pi_b/pi + f d^pi_{M_hat}(s)
/// at each state. States where both occupancies vanish get xi = 1.
template <typename Scalar>
VectorX<Scalar> xi(const VectorX<Scalar>& behavior_state, const VectorX<Scalar>& model_state,
                   const TabularPolicy<Scalar>& pi, const TabularPolicy<Scalar>& pi_b, Scalar f) {
  const Index S = pi.rows();
  VectorX<Scalar> out(S);
  for (Index s = 0; s < S; ++s) {
    Scalar hi = -std::numeric_limits<Scalar>::infinity();
    Scalar lo = std::numeric_limits<Scalar>::infinity();
    for (Index a = 0; a < pi.cols(); ++a) {
      if (pi(s, a) <= Scalar(0)) {
        if (pi_b(s, a) > Scalar(0))
          throw Error(ErrorCode::Domain, "xi needs pi(a|s) > 0 wherever pi_b(a|s) > 0 (s=" + std::to_string(s) + ")");
        continue;
      }
      const Scalar ratio = pi_b(s, a) / pi(s, a);
      hi = std::max(hi, ratio);
      lo = std::min(lo, ratio);
    }
    const Scalar num = (Scalar(1) - f) * behavior_state(s) * hi + f * model_state(s);
    const Scalar den = (Scalar(1) - f) * behavior_state(s) * lo + f * model_state(s);
    out(s) = den > Scalar(0) ? num / den : Scalar(1);
  }
  return out;
}

/// Per-state largest mixture weight, the denominator shared by the delta_l terms.
template <typename Scalar>
VectorX<Scalar> max_mixture_weight(const VectorX<Scalar>& behavior_state, const VectorX<Scalar>& model_state,
                                   const TabularPolicy<Scalar>& pi, const TabularPolicy<Scalar>& pi_b, Scalar f) {
  VectorX<Scalar> out(pi.rows());
  for (Index s = 0; s < pi.rows(); ++s) {
    Scalar hi = Scalar(0);
    for (Index a = 0; a < pi.cols(); ++a)
      if (pi(s, a) > Scalar(0)) hi = std::max(hi, pi_b(s, a) / pi(s, a));
    out(s) = (Scalar(1) - f) * behavior_state(s) * hi + f * model_state(s);
  }
  return out;
}

/// Sampling and model error constants. Visit counts of zero are replaced by
/// `unvisited_count` (< 1) wherever 1/sqrt(|D|) is needed.
template <typename Scalar>
struct ErrorConstants {
  Scalar c_r = 0;   // reward concentration constant
  Scalar c_t = 0;   // transition concentration constant
  Scalar c_rt = 0;  // combined constant for the backup error
  Scalar r_max = 1;
  MatrixX<Scalar> reward_error;  // |r_M - r_Mhat|
  MatrixX<Scalar> tv;            // D_TV(T_M, T_Mhat)
  MatrixX<Scalar> counts;        // |D(s,a)|
  Scalar unvisited_count = Scalar(0.5);

  MatrixX<Scalar> effective_counts() const {
    return counts.unaryExpr([this](Scalar n) { return n > Scalar(0) ? n : unvisited_count; });
  }
  /// L1 transition error, 2 * TV.
  MatrixX<Scalar> l1() const { return Scalar(2) * tv; }
};

template <typename Scalar>
Scalar max_abs_reward(const TabularMdp<Scalar>& m) {
  return m.rewards.cwiseAbs().maxCoeff();
}

/// Exact model-error terms between `truth` and `model`; sampling constants
/// are left at zero.
template <typename Scalar>
ErrorConstants<Scalar> model_error_constants(const TabularMdp<Scalar>& truth, const TabularMdp<Scalar>& model,
                                             const std::type_identity_t<MatrixX<Scalar>>& counts, Scalar r_max) {
  ErrorConstants<Scalar> c;
  c.r_max = r_max;
  c.counts = counts;
  c.reward_error = (truth.rewards - model.rewards).cwiseAbs();
  c.tv.resize(truth.num_states, truth.num_actions);
  for (int s = 0; s < truth.num_states; ++s)
    for (int a = 0; a < truth.num_actions; ++a)
      c.tv(s, a) = Scalar(0.5) * (truth.transitions.row(truth.row(s, a)) - model.transitions.row(truth.row(s, a)))
                                     .cwiseAbs()
                                     .sum();
  return c;
}

/// Smallest sampling constants for which the concentration inequalities hold
/// exactly between `truth` and `empirical` at every (s, a):
///   |r_bar - r| <= c_r / sqrt(n),  ||T_bar - T||_1 <= c_t / sqrt(n),
///   |r_bar - r| + gamma ||T_bar - T||_1 R_max / (1-gamma) <= c_rt R_max / ((1-gamma) sqrt(n)).
template <typename Scalar>
void set_exact_sampling_constants(ErrorConstants<Scalar>& c, const TabularMdp<Scalar>& truth,
                                  const TabularMdp<Scalar>& empirical) {
  const MatrixX<Scalar> n = c.effective_counts();
  const Scalar g = truth.discount;
  c.c_r = c.c_t = c.c_rt = Scalar(0);
  for (int s = 0; s < truth.num_states; ++s) {
    for (int a = 0; a < truth.num_actions; ++a) {
      const Scalar root = std::sqrt(n(s, a));
      const Scalar er = std::abs(truth.rewards(s, a) - empirical.rewards(s, a));
      const Scalar et =
          (truth.transitions.row(truth.row(s, a)) - empirical.transitions.row(truth.row(s, a))).cwiseAbs().sum();
      c.c_r = std::max(c.c_r, er * root);
      c.c_t = std::max(c.c_t, et * root);
      if (c.r_max > Scalar(0))
        c.c_rt = std::max(c.c_rt, root * (Scalar(1) - g) / c.r_max * (er + g * et * c.r_max / (Scalar(1) - g)));
    }
  }
}

/// Lambda threshold for the lower-bound condition. Throws
/// ErrorCode::Unsatisfiable when the shared denominator is not positive.
template <typename Scalar>
Scalar delta_l(const ErrorConstants<Scalar>& c, const OccupancyTables<Scalar>& occ, const VectorX<Scalar>& xi_s,
               const TabularPolicy<Scalar>& pi, const TabularPolicy<Scalar>& pi_b, Scalar f, Scalar gamma) {
  const VectorX<Scalar> weight = max_mixture_weight<Scalar>(occ.behavior_state(), occ.model_state(), pi, pi_b, f);
  const VectorX<Scalar> d_s = occ.data_state();
  Scalar denom = std::numeric_limits<Scalar>::infinity();
  for (Index s = 0; s < xi_s.size(); ++s) {
    if (weight(s) <= Scalar(0)) continue;  // state carries no data or model mass
    denom = std::min(denom, (xi_s(s) - Scalar(1)) * d_s(s) / weight(s));
  }
  if (!(denom > Scalar(0)) || !std::isfinite(static_cast<double>(denom)))
    throw Error(ErrorCode::Unsatisfiable, "delta_l denominator is not positive; the lower-bound condition cannot hold");

  Scalar sampling = Scalar(0);
  if (c.c_rt > Scalar(0)) {
    const Scalar root = std::sqrt(c.effective_counts().minCoeff());
    sampling = (Scalar(1) - f) * c.c_rt * c.r_max / ((Scalar(1) - gamma) * root);
  }
  const Scalar model_term =
      f * (c.reward_error.maxCoeff() + Scalar(2) * gamma * c.r_max / (Scalar(1) - gamma) * c.tv.maxCoeff());
  return (sampling + model_term) / denom;
}

// ---------------------------------------------------------------------------
// Theorem checks.

template <typename Scalar>
struct LowerBoundReport {
  VectorX<Scalar> xi;
  std::optional<Scalar> delta_l;  // empty when unsatisfiable
  std::vector<bool> premise;      // sum_a omega > xi * sum_a d
  std::vector<bool> lower_bound;  // V_hat <= V + tol
  VectorX<Scalar> v;
  VectorX<Scalar> v_hat;
  bool premise_all = false;
  bool lambda_ok = false;
  bool implication_holds = true;  // premise_all && lambda_ok => all lower_bound
  FixedPoint<Scalar> fixed_point;
};

template <typename Scalar>
LowerBoundReport<Scalar> check_theorem1(const TabularMdp<Scalar>& truth, const TabularMdp<Scalar>& empirical,
                                        const TabularMdp<Scalar>& model, const TabularPolicy<Scalar>& pi,
                                        const TabularPolicy<Scalar>& pi_b, const OccupancyTables<Scalar>& occ, Scalar f,
                                        Scalar lambda, const ErrorConstants<Scalar>& constants,
                                        Scalar tol = Scalar(1e-8), const IterationOptions& opt = {}) {
  LowerBoundReport<Scalar> rep;
  rep.xi = xi<Scalar>(occ.behavior_state(), occ.model_state(), pi, pi_b, f);
  try {
    rep.delta_l = delta_l(constants, occ, rep.xi, pi, pi_b, f, truth.discount);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Unsatisfiable) throw;
  }
  rep.fixed_point = domain_backup_fixed_point(empirical, model, pi, occ, f, lambda, opt);
  rep.v_hat = state_values(rep.fixed_point.q, pi);
  rep.v = state_values(exact_policy_eval(truth, pi), pi);
  const VectorX<Scalar> omega_s = occ.omega.rowwise().sum();
  const VectorX<Scalar> d_s = occ.data_state();
  rep.premise_all = true;
  bool all_bounded = true;
  for (int s = 0; s < truth.num_states; ++s) {
    const bool p = omega_s(s) > rep.xi(s) * d_s(s);
    const bool b = rep.v_hat(s) <= rep.v(s) + tol;
    rep.premise.push_back(p);
    rep.lower_bound.push_back(b);
    rep.premise_all = rep.premise_all && p;
    all_bounded = all_bounded && b;
  }
  rep.lambda_ok = rep.delta_l.has_value() && lambda >= *rep.delta_l;
  rep.implication_holds = !(rep.premise_all && rep.lambda_ok) || all_bounded;
  return rep;
}

template <typename Scalar>
struct ConservatismReport {
  Scalar kappa1 = 0;  // DOMAIN
  Scalar kappa2 = 0;  // COMBO
  Scalar flag_lhs = 0;  // E_{d(s)}[d^pi_{M_hat}(s)]
  Scalar flag_rhs = 0;  // E_{d(s), pi}[omega(s,a)]
  bool flag = false;
  bool implication_holds = true;  // flag => kappa1 > kappa2
};

/// `eval_state` is the state distribution d(s) used for both averages.
template <typename Scalar>
ConservatismReport<Scalar> check_theorem2(const TabularMdp<Scalar>& empirical, const TabularMdp<Scalar>& model,
                                          const TabularPolicy<Scalar>& pi, const OccupancyTables<Scalar>& occ,
                                          const VectorX<Scalar>& eval_state, Scalar f, Scalar lambda,
                                          const IterationOptions& opt = {}) {
  ConservatismReport<Scalar> rep;
  const MatrixX<Scalar> q1 = domain_backup_fixed_point(empirical, model, pi, occ, f, lambda, opt).q;
  const MatrixX<Scalar> q2 = combo_backup_fixed_point(empirical, model, pi, occ.rho, occ.data, f, lambda, opt).q;
  rep.kappa1 = eval_state.dot(state_values(q1, pi));
  rep.kappa2 = eval_state.dot(state_values(q2, pi));
  rep.flag_lhs = eval_state.dot(occ.model_state());
  rep.flag_rhs = eval_state.dot(occ.omega.cwiseProduct(pi).rowwise().sum());
  rep.flag = rep.flag_lhs >= rep.flag_rhs;
  rep.implication_holds = !rep.flag || rep.kappa1 > rep.kappa2;
  return rep;
}

template <typename Scalar>
struct SafetyReport {
  Scalar varpi_star = 0;
  Scalar varpi_b = 0;
  Scalar mu1 = 0, mu2 = 0, mu3 = 0;
  Scalar zeta = 0;
  Scalar j_star = 0, j_b = 0;
  Scalar j_diff = 0;
  bool bound_holds = true;  // j_diff >= zeta - tol
};

/// varpi(pi, f) = E_{d^pi_{M_f}}[eta] with M_f the f-mixture of the empirical and learned MDPs.
template <typename Scalar>
Scalar varpi(const TabularMdp<Scalar>& mixed, const TabularPolicy<Scalar>& pi, const MatrixX<Scalar>& eta) {
  return occupancy(mixed, pi).cwiseProduct(eta).sum();
}

template <typename Scalar>
SafetyReport<Scalar> safety_diagnostic(const TabularMdp<Scalar>& truth, const TabularMdp<Scalar>& empirical,
                                       const TabularMdp<Scalar>& model, const TabularPolicy<Scalar>& pi_star,
                                       const TabularPolicy<Scalar>& pi_b, const OccupancyTables<Scalar>& occ, Scalar f,
                                       Scalar lambda, const ErrorConstants<Scalar>& c, Scalar tol = Scalar(1e-8)) {
  SafetyReport<Scalar> rep;
  const Scalar g = truth.discount;
  const MatrixX<Scalar> eta = domain_penalty(occ.omega, occ.data, occ.beta);
  const TabularMdp<Scalar> mixed = mix(empirical, model, f);
  rep.varpi_star = varpi(mixed, pi_star, eta);
  rep.varpi_b = varpi(mixed, pi_b, eta);
  rep.mu1 = lambda / (Scalar(1) - g) * (rep.varpi_star - rep.varpi_b);

  const MatrixX<Scalar> d_star = occupancy(truth, pi_star);
  const MatrixX<Scalar> root = c.effective_counts().cwiseSqrt();
  const MatrixX<Scalar> sampling = ((c.c_r + c.r_max * c.c_t) * MatrixX<Scalar>::Ones(root.rows(), root.cols()))
                                       .cwiseQuotient(root);
  rep.mu2 = Scalar(2) * (Scalar(1) - f) / (Scalar(1) - g) * d_star.cwiseProduct(sampling).sum();
  rep.mu3 = Scalar(2) * f / (Scalar(1) - g) * d_star.cwiseProduct(c.reward_error + c.r_max * c.l1()).sum();
  rep.zeta = rep.mu1 - rep.mu2 - rep.mu3;
  rep.j_star = expected_return(truth, pi_star);
  rep.j_b = expected_return(truth, pi_b);
  rep.j_diff = rep.j_star - rep.j_b;
  rep.bound_holds = rep.j_diff >= rep.zeta - tol;
  return rep;
}

}  // namespace midl::tabular
