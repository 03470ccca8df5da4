#pragma once

#include "midl/tabular/mdp.hpp"

#include <algorithm>
#include <string>

namespace midl::tabular {

/// Distribution tables over (s, a) used by the penalized backups. All S x A.
template <typename Scalar>
struct OccupancyTables {
  MatrixX<Scalar> behavior;  // d^{pi_b}(s,a) in the data-generating MDP
  MatrixX<Scalar> model;     // d^{pi}_{M_hat}(s,a)
  MatrixX<Scalar> beta;      // (1-f) behavior + f model
  MatrixX<Scalar> data;      // d(s,a), offline sampling distribution
  MatrixX<Scalar> omega;     // model sampling distribution
  MatrixX<Scalar> rho;       // COMBO-style model distribution

  VectorX<Scalar> behavior_state() const { return behavior.rowwise().sum(); }
  VectorX<Scalar> model_state() const { return model.rowwise().sum(); }
  VectorX<Scalar> data_state() const { return data.rowwise().sum(); }
};

/// Builds the tables with the usual defaults: d = d^{pi_b}, rho = omega = d^{pi}_{M_hat}.
template <typename Scalar>
OccupancyTables<Scalar> make_occupancy_tables(const TabularMdp<Scalar>& data_mdp, const TabularMdp<Scalar>& model_mdp,
                                              const TabularPolicy<Scalar>& pi, const TabularPolicy<Scalar>& pi_b,
                                              Scalar f) {
  if (!(f >= Scalar(0) && f <= Scalar(1))) throw Error(ErrorCode::Domain, "model fraction f must lie in [0, 1]");
  OccupancyTables<Scalar> t;
  t.behavior = occupancy(data_mdp, pi_b);
  t.model = occupancy(model_mdp, pi);
  t.beta = (Scalar(1) - f) * t.behavior + f * t.model;
  t.data = t.behavior;
  t.rho = t.model;
  t.omega = t.model;
  return t;
}

/// Throws unless `table` is nonnegative and sums to one within `tol`.
template <typename Scalar>
void require_distribution(const MatrixX<Scalar>& table, const char* name, Scalar tol = Scalar(1e-10)) {
  if ((table.array() < Scalar(0)).any()) throw Error(ErrorCode::Domain, std::string(name) + " has negative entries");
  if (std::abs(table.sum() - Scalar(1)) > tol) throw Error(ErrorCode::Domain, std::string(name) + " does not sum to 1");
}

namespace detail {
template <typename Scalar>
[[noreturn]] void undefined_penalty(Index s, Index a) {
  throw Error(ErrorCode::UndefinedPenalty, "penalty denominator is zero at (s=" + std::to_string(s) +
                                               ", a=" + std::to_string(a) + ") while the numerator is not");
}
}  // namespace detail

/// eta(s,a) = (omega - d) / d_beta. Entries with d_beta = 0 and omega = d are 0.
template <typename Scalar>
MatrixX<Scalar> domain_penalty(const MatrixX<Scalar>& omega, const MatrixX<Scalar>& data, const MatrixX<Scalar>& beta) {
  MatrixX<Scalar> eta(omega.rows(), omega.cols());
  for (Index s = 0; s < omega.rows(); ++s) {
    for (Index a = 0; a < omega.cols(); ++a) {
      const Scalar num = omega(s, a) - data(s, a);
      if (beta(s, a) > Scalar(0)) {
        eta(s, a) = num / beta(s, a);
      } else if (num == Scalar(0)) {
        eta(s, a) = Scalar(0);
      } else {
        detail::undefined_penalty<Scalar>(s, a);
      }
    }
  }
  return eta;
}

/// COMBO penalty (rho - d) / ((1-f) d + f rho).
template <typename Scalar>
MatrixX<Scalar> combo_penalty(const MatrixX<Scalar>& rho, const MatrixX<Scalar>& data, Scalar f) {
  const MatrixX<Scalar> denom = (Scalar(1) - f) * data + f * rho;
  return domain_penalty(rho, data, denom);
}

template <typename Scalar>
struct FixedPoint {
  MatrixX<Scalar> q;
  int iterations = 0;
  /// Largest observed ||Q_{k+1} - Q_k|| / ||Q_k - Q_{k-1}|| (sup norm).
  Scalar max_contraction = Scalar(0);
  bool converged = false;
};

struct IterationOptions {
  double tol = 1e-10;
  int max_iterations = 100000;
  /// Successive differences below contraction_floor * (1 + max|Q|) are
  /// dominated by rounding and are excluded from the contraction estimate.
  double contraction_floor = 1e-8;
};

/// Iterates Q <- r - lambda * eta + gamma P^pi Q on `mdp` until the sup-norm
/// change drops to tol.
template <typename Scalar>
FixedPoint<Scalar> penalized_fixed_point(const TabularMdp<Scalar>& mdp, const TabularPolicy<Scalar>& pi,
                                         const MatrixX<Scalar>& eta, Scalar lambda, const IterationOptions& opt = {}) {
  const VectorX<Scalar> r = flatten<Scalar>(mdp.rewards - lambda * eta);
  const MatrixX<Scalar> p = pair_transition(mdp, pi);
  VectorX<Scalar> q = VectorX<Scalar>::Zero(mdp.pairs());
  FixedPoint<Scalar> out;
  Scalar prev = Scalar(-1);
  for (int k = 0; k < opt.max_iterations; ++k) {
    VectorX<Scalar> next = r + mdp.discount * (p * q);
    const Scalar change = (next - q).cwiseAbs().maxCoeff();
    q.swap(next);
    out.iterations = k + 1;
    if (!std::isfinite(static_cast<double>(change)))
      throw Error(ErrorCode::NonFinite, "penalized backup diverged");
    const Scalar floor = Scalar(opt.contraction_floor) * (Scalar(1) + q.cwiseAbs().maxCoeff());
    if (prev > floor && change > floor)
      out.max_contraction = std::max(out.max_contraction, change / prev);
    prev = change;
    if (change <= Scalar(opt.tol)) {
      out.converged = true;
      break;
    }
  }
  out.q = unflatten(q, mdp.num_states, mdp.num_actions);
  return out;
}

/// Fixed point of Q <- (1-f) T_bar Q + f T_hat Q - lambda (omega - d) / d_beta.
template <typename Scalar>
FixedPoint<Scalar> domain_backup_fixed_point(const TabularMdp<Scalar>& empirical, const TabularMdp<Scalar>& model,
                                             const TabularPolicy<Scalar>& pi, const OccupancyTables<Scalar>& occ,
                                             Scalar f, Scalar lambda, const IterationOptions& opt = {}) {
  const MatrixX<Scalar> eta = domain_penalty(occ.omega, occ.data, occ.beta);
  return penalized_fixed_point(mix(empirical, model, f), pi, eta, lambda, opt);
}

/// Same operator with the COMBO penalty lambda (rho - d) / ((1-f) d + f rho).
template <typename Scalar>
FixedPoint<Scalar> combo_backup_fixed_point(const TabularMdp<Scalar>& empirical, const TabularMdp<Scalar>& model,
                                            const TabularPolicy<Scalar>& pi, const MatrixX<Scalar>& rho,
                                            const MatrixX<Scalar>& data, Scalar f, Scalar lambda,
                                            const IterationOptions& opt = {}) {
  const MatrixX<Scalar> eta = combo_penalty(rho, data, f);
  return penalized_fixed_point(mix(empirical, model, f), pi, eta, lambda, opt);
}

/// Greedy deterministic policy for a Q table (ties to the lowest action).
template <typename Scalar>
TabularPolicy<Scalar> greedy_policy(const MatrixX<Scalar>& q) {
  TabularPolicy<Scalar> pi = TabularPolicy<Scalar>::Zero(q.rows(), q.cols());
  for (Index s = 0; s < q.rows(); ++s) {
    Index best = 0;
    for (Index a = 1; a < q.cols(); ++a)
      if (q(s, a) > q(s, best)) best = a;
    pi(s, best) = Scalar(1);
  }
  return pi;
}

/// Policy iteration on the mixed MDP with reward r_f - lambda * eta, where eta
/// is held fixed. Returns the optimal deterministic policy of that MDP.
template <typename Scalar>
TabularPolicy<Scalar> penalized_policy_iteration(const TabularMdp<Scalar>& mixed, const MatrixX<Scalar>& eta,
                                                 Scalar lambda, TabularPolicy<Scalar> pi, int max_iterations = 1000) {
  const MatrixX<Scalar> reward = mixed.rewards - lambda * eta;
  for (int k = 0; k < max_iterations; ++k) {
    const MatrixX<Scalar> q = exact_policy_eval(mixed, pi, &reward);
    // Keep the current action unless another is strictly better by a margin,
    // so rounding cannot make the loop cycle.
    TabularPolicy<Scalar> next = pi;
    bool changed = false;
    const VectorX<Scalar> v = state_values(q, pi);
    for (int s = 0; s < mixed.num_states; ++s) {
      Index best = 0;
      for (Index a = 1; a < q.cols(); ++a)
        if (q(s, a) > q(s, best)) best = a;
      const Scalar margin = Scalar(1e-12) * (Scalar(1) + std::abs(v(s)));
      if (q(s, best) > v(s) + margin) {
        next.row(s).setZero();
        next(s, best) = Scalar(1);
        changed = true;
      }
    }
    if (!changed) {
      return pi;
    }
    pi = std::move(next);
  }
  throw Error(ErrorCode::State, "penalized policy iteration did not terminate");
}

}  // namespace midl::tabular
