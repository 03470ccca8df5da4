#pragma once

#include "midl/common.hpp"

#include <cmath>
#include <random>

namespace midl::tabular {

/// Finite MDP. Transition rows are indexed by s * A + a; each row is a
/// distribution over next states.
template <typename Scalar>
struct TabularMdp {
  int num_states = 0;
  int num_actions = 0;
  MatrixX<Scalar> transitions;  // (S*A) x S
  MatrixX<Scalar> rewards;      // S x A
  Scalar discount = Scalar(0.9);
  VectorX<Scalar> initial;      // S

  Index row(int s, int a) const { return static_cast<Index>(s) * num_actions + a; }
  Index pairs() const { return static_cast<Index>(num_states) * num_actions; }

  void validate(Scalar tol = Scalar(1e-12)) const {
    if (num_states <= 0 || num_actions <= 0) throw Error(ErrorCode::Shape, "MDP needs states and actions");
    if (transitions.rows() != pairs() || transitions.cols() != num_states)
      throw Error(ErrorCode::Shape, "transition tensor has wrong shape");
    if (rewards.rows() != num_states || rewards.cols() != num_actions)
      throw Error(ErrorCode::Shape, "reward table has wrong shape");
    if (initial.size() != num_states) throw Error(ErrorCode::Shape, "initial distribution has wrong size");
    if (!(discount > Scalar(0) && discount < Scalar(1)))
      throw Error(ErrorCode::Domain, "discount must lie in (0, 1)");
    if ((transitions.array() < Scalar(0)).any()) throw Error(ErrorCode::Domain, "negative transition probability");
    const VectorX<Scalar> sums = transitions.rowwise().sum();
    if ((sums.array() - Scalar(1)).abs().maxCoeff() > tol)
      throw Error(ErrorCode::Domain, "transition rows must sum to 1");
    if (std::abs(initial.sum() - Scalar(1)) > tol || (initial.array() < Scalar(0)).any())
      throw Error(ErrorCode::Domain, "initial distribution must be a distribution");
  }
};

/// Stochastic policy as an S x A row-stochastic matrix.
template <typename Scalar>
using TabularPolicy = MatrixX<Scalar>;

template <typename Scalar>
void validate_policy(const TabularMdp<Scalar>& m, const TabularPolicy<Scalar>& pi, Scalar tol = Scalar(1e-12)) {
  if (pi.rows() != m.num_states || pi.cols() != m.num_actions)
    throw Error(ErrorCode::Shape, "policy shape does not match MDP");
  if ((pi.array() < Scalar(0)).any()) throw Error(ErrorCode::Domain, "negative policy probability");
  if (((pi.rowwise().sum().array() - Scalar(1)).abs() > tol).any())
    throw Error(ErrorCode::Domain, "policy rows must sum to 1");
}

/// Flattens an S x A table to an S*A vector in row order (s * A + a).
template <typename Scalar>
VectorX<Scalar> flatten(const MatrixX<Scalar>& table) {
  VectorX<Scalar> v(table.size());
  for (Index s = 0; s < table.rows(); ++s)
    for (Index a = 0; a < table.cols(); ++a) v(s * table.cols() + a) = table(s, a);
  return v;
}

template <typename Scalar>
MatrixX<Scalar> unflatten(const VectorX<Scalar>& v, int num_states, int num_actions) {
  MatrixX<Scalar> t(num_states, num_actions);
  for (int s = 0; s < num_states; ++s)
    for (int a = 0; a < num_actions; ++a) t(s, a) = v(static_cast<Index>(s) * num_actions + a);
  return t;
}

/// P^pi over state-action pairs: P[(s,a),(s',a')] = T(s'|s,a) pi(a'|s').
template <typename Scalar>
MatrixX<Scalar> pair_transition(const TabularMdp<Scalar>& m, const TabularPolicy<Scalar>& pi) {
  MatrixX<Scalar> p(m.pairs(), m.pairs());
  for (Index i = 0; i < m.pairs(); ++i)
    for (int s2 = 0; s2 < m.num_states; ++s2)
      for (int a2 = 0; a2 < m.num_actions; ++a2) p(i, m.row(s2, a2)) = m.transitions(i, s2) * pi(s2, a2);
  return p;
}

/// State-to-state kernel under pi: P_s(s, s') = sum_a pi(a|s) T(s'|s,a).
template <typename Scalar>
MatrixX<Scalar> state_transition(const TabularMdp<Scalar>& m, const TabularPolicy<Scalar>& pi) {
  MatrixX<Scalar> p = MatrixX<Scalar>::Zero(m.num_states, m.num_states);
  for (int s = 0; s < m.num_states; ++s)
    for (int a = 0; a < m.num_actions; ++a) p.row(s) += pi(s, a) * m.transitions.row(m.row(s, a));
  return p;
}

/// Q^pi by a direct solve of (I - gamma P^pi) q = r.
template <typename Scalar>
MatrixX<Scalar> exact_policy_eval(const TabularMdp<Scalar>& m, const TabularPolicy<Scalar>& pi,
                                  const MatrixX<Scalar>* reward_override = nullptr) {
  const MatrixX<Scalar>& r = reward_override ? *reward_override : m.rewards;
  const MatrixX<Scalar> system =
      MatrixX<Scalar>::Identity(m.pairs(), m.pairs()) - m.discount * pair_transition(m, pi);
  const VectorX<Scalar> rhs = flatten(r);
  const VectorX<Scalar> q = system.partialPivLu().solve(rhs);
  if (!q.allFinite()) throw Error(ErrorCode::NonFinite, "policy evaluation produced non-finite values");
  return unflatten(q, m.num_states, m.num_actions);
}

template <typename Scalar>
VectorX<Scalar> state_values(const MatrixX<Scalar>& q, const TabularPolicy<Scalar>& pi) {
  return q.cwiseProduct(pi).rowwise().sum();
}

/// Normalised discounted state occupancy d^pi(s) = (1-gamma) rho0^T (I - gamma P_s)^{-1}.
template <typename Scalar>
VectorX<Scalar> state_occupancy(const TabularMdp<Scalar>& m, const TabularPolicy<Scalar>& pi) {
  const MatrixX<Scalar> system =
      MatrixX<Scalar>::Identity(m.num_states, m.num_states) - m.discount * state_transition(m, pi);
  // Row vector solve: x^T (I - gamma P) = (1 - gamma) rho0^T.
  const VectorX<Scalar> d = system.transpose().partialPivLu().solve((Scalar(1) - m.discount) * m.initial);
  return d;
}

/// d^pi(s, a) = d^pi(s) pi(a|s).
template <typename Scalar>
MatrixX<Scalar> occupancy(const TabularMdp<Scalar>& m, const TabularPolicy<Scalar>& pi) {
  const VectorX<Scalar> ds = state_occupancy(m, pi);
  return pi.array().colwise() * ds.array();
}

/// J(M, pi) = rho0^T V^pi = E_{d^pi}[r] / (1 - gamma).
template <typename Scalar>
Scalar expected_return(const TabularMdp<Scalar>& m, const TabularPolicy<Scalar>& pi) {
  return m.initial.dot(state_values(exact_policy_eval(m, pi), pi));
}

/// Convex combination (1-f) a + f b of transitions and rewards.
template <typename Scalar>
TabularMdp<Scalar> mix(const TabularMdp<Scalar>& a, const TabularMdp<Scalar>& b, Scalar f) {
  TabularMdp<Scalar> out = a;
  out.transitions = (Scalar(1) - f) * a.transitions + f * b.transitions;
  out.rewards = (Scalar(1) - f) * a.rewards + f * b.rewards;
  return out;
}

// ---------------------------------------------------------------------------
// Random instances.

template <typename Scalar>
VectorX<Scalar> dirichlet(int n, double concentration, Rng& rng) {
  std::gamma_distribution<double> g(concentration, 1.0);
  VectorX<Scalar> v(n);
  double total = 0;
  for (int i = 0; i < n; ++i) {
    const double x = g(rng);
    v(i) = static_cast<Scalar>(x);
    total += x;
  }
  return v / static_cast<Scalar>(total);
}

/// Dirichlet(1) transition rows, rewards ~ Uniform[-1, 1], uniform initial distribution.
template <typename Scalar>
TabularMdp<Scalar> random_mdp(int num_states, int num_actions, Scalar discount, Rng& rng) {
  TabularMdp<Scalar> m;
  m.num_states = num_states;
  m.num_actions = num_actions;
  m.discount = discount;
  m.transitions.resize(m.pairs(), num_states);
  for (Index i = 0; i < m.pairs(); ++i) m.transitions.row(i) = dirichlet<Scalar>(num_states, 1.0, rng).transpose();
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  m.rewards.resize(num_states, num_actions);
  for (int s = 0; s < num_states; ++s)
    for (int a = 0; a < num_actions; ++a) m.rewards(s, a) = static_cast<Scalar>(u(rng));
  m.initial = VectorX<Scalar>::Constant(num_states, Scalar(1) / num_states);
  return m;
}

template <typename Scalar>
TabularPolicy<Scalar> random_policy(int num_states, int num_actions, double concentration, Rng& rng) {
  TabularPolicy<Scalar> pi(num_states, num_actions);
  for (int s = 0; s < num_states; ++s) pi.row(s) = dirichlet<Scalar>(num_actions, concentration, rng).transpose();
  return pi;
}

template <typename Scalar>
TabularPolicy<Scalar> uniform_policy(int num_states, int num_actions) {
  return TabularPolicy<Scalar>::Constant(num_states, num_actions, Scalar(1) / num_actions);
}

/// Learned-model stand-in: each transition row is mixed toward a random
/// distribution with weight `transition_noise`; rewards get U[-reward_noise, reward_noise].
template <typename Scalar>
TabularMdp<Scalar> perturb_mdp(const TabularMdp<Scalar>& m, double transition_noise, double reward_noise, Rng& rng) {
  TabularMdp<Scalar> out = m;
  std::uniform_real_distribution<double> u(-reward_noise, reward_noise);
  for (Index i = 0; i < m.pairs(); ++i) {
    const VectorX<Scalar> other = dirichlet<Scalar>(m.num_states, 1.0, rng);
    out.transitions.row(i) =
        (Scalar(1) - Scalar(transition_noise)) * m.transitions.row(i) + Scalar(transition_noise) * other.transpose();
  }
  for (int s = 0; s < m.num_states; ++s)
    for (int a = 0; a < m.num_actions; ++a) out.rewards(s, a) += static_cast<Scalar>(u(rng));
  return out;
}

/// Empirical MDP built from counts. Unvisited pairs become zero-reward
/// self-loops and are reported through `counts` == 0.
template <typename Scalar>
struct EmpiricalMdp {
  TabularMdp<Scalar> mdp;
  MatrixX<Scalar> counts;  // S x A visit counts |D(s,a)|
};

/// Samples `samples` transitions with (s, a) ~ d^{pi_b} in `truth` and builds
/// the maximum-likelihood tabular model. Rewards are observed noise-free.
template <typename Scalar>
EmpiricalMdp<Scalar> empirical_mdp(const TabularMdp<Scalar>& truth, const TabularPolicy<Scalar>& behavior,
                                   int samples, Rng& rng) {
  const MatrixX<Scalar> d = occupancy(truth, behavior);
  std::vector<double> weights(static_cast<std::size_t>(truth.pairs()));
  for (int s = 0; s < truth.num_states; ++s)
    for (int a = 0; a < truth.num_actions; ++a)
      weights[static_cast<std::size_t>(truth.row(s, a))] = static_cast<double>(d(s, a));
  std::discrete_distribution<Index> pick(weights.begin(), weights.end());
  MatrixX<Scalar> next_counts = MatrixX<Scalar>::Zero(truth.pairs(), truth.num_states);
  for (int n = 0; n < samples; ++n) {
    const Index i = pick(rng);
    std::vector<double> row(truth.transitions.cols());
    for (Index k = 0; k < truth.transitions.cols(); ++k) row[static_cast<std::size_t>(k)] = truth.transitions(i, k);
    std::discrete_distribution<int> next(row.begin(), row.end());
    next_counts(i, next(rng)) += Scalar(1);
  }
  EmpiricalMdp<Scalar> out;
  out.mdp = truth;
  out.counts = MatrixX<Scalar>::Zero(truth.num_states, truth.num_actions);
  for (int s = 0; s < truth.num_states; ++s) {
    for (int a = 0; a < truth.num_actions; ++a) {
      const Index i = truth.row(s, a);
      const Scalar n = next_counts.row(i).sum();
      out.counts(s, a) = n;
      if (n > Scalar(0)) {
        out.mdp.transitions.row(i) = next_counts.row(i) / n;
      } else {
        out.mdp.transitions.row(i).setZero();
        out.mdp.transitions(i, s) = Scalar(1);
        out.mdp.rewards(s, a) = Scalar(0);
      }
    }
  }
  return out;
}

}  // namespace midl::tabular
