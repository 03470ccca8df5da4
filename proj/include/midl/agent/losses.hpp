#pragma once

#include "midl/agent/actor.hpp"
#include "midl/agent/critic.hpp"
#include "midl/core/batch.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

namespace midl::agent {

/// r + gamma * (1 - done) * [min_k Qbar_k(s', a') - alpha log pi(a'|s')], a' ~ pi(.|s').
template <typename Scalar>
VectorX<Scalar> bellman_target(const CriticPair<Scalar>& c, const Actor<Scalar>& actor, double alpha, double gamma,
                               const core::Batch<Scalar>& batch, Rng& rng) {
  const auto next = actor.sample(batch.next_states, rng);
  const VectorX<Scalar> q0 = q_values(c.target[0], batch.next_states, next.actions);
  const VectorX<Scalar> q1 = q_values(c.target[1], batch.next_states, next.actions);
  const VectorX<Scalar> v = q0.cwiseMin(q1) - static_cast<Scalar>(alpha) * next.log_prob;
  VectorX<Scalar> y =
      batch.rewards + (static_cast<Scalar>(gamma) * (Scalar(1) - batch.terminals.array()) * v.array()).matrix();
  if (!y.allFinite()) throw Error(ErrorCode::NonFinite, "non-finite Bellman target");
  return y;
}

/// Proposal actions for the log-sum-exp estimate: for state i, columns
/// [i*K, (i+1)*K) of `inputs` hold (s_i; a_ij) and `log_proposal` the log
/// density each action was drawn from.
template <typename Scalar>
struct PenaltySamples {
  MatrixX<Scalar> inputs;
  VectorX<Scalar> log_proposal;
  Index states = 0;
  Index per_state = 0;
};

/// `uniform_count` actions from Uniform(box) and `actor_count` from pi(.|s)
/// per state. Actor actions are treated as constants by the critic loss.
template <typename Scalar>
PenaltySamples<Scalar> draw_penalty_actions(const Actor<Scalar>& actor, const MatrixX<Scalar>& states, int uniform_count,
                                            int actor_count, Rng& rng) {
  if (uniform_count < 0 || actor_count < 0 || uniform_count + actor_count == 0) {
    throw Error(ErrorCode::Argument, "penalty needs at least one sampled action per state");
  }
  const Index n = states.cols(), k = uniform_count + actor_count;
  const Index s_dim = states.rows(), a_dim = actor.action_dim();
  const ActionBox& box = actor.box();
  PenaltySamples<Scalar> out;
  out.states = n;
  out.per_state = k;
  out.inputs.resize(s_dim + a_dim, n * k);
  out.log_proposal.resize(n * k);
  std::uniform_real_distribution<double> uni(box.lo, box.hi);
  const Scalar log_uniform = static_cast<Scalar>(-box.log_volume(a_dim));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < uniform_count; ++j) {
      const Index col = i * k + j;
      out.inputs.col(col).head(s_dim) = states.col(i);
      for (Index d = 0; d < a_dim; ++d) out.inputs(s_dim + d, col) = static_cast<Scalar>(uni(rng));
      out.log_proposal(col) = log_uniform;
    }
  }
  if (actor_count > 0) {
    // Repeat each state actor_count times so one actor pass covers all draws.
    MatrixX<Scalar> rep(s_dim, n * actor_count);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < actor_count; ++j) rep.col(i * actor_count + j) = states.col(i);
    const auto smp = actor.sample(rep, rng);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < actor_count; ++j) {
        const Index col = i * k + uniform_count + j, src = i * actor_count + j;
        out.inputs.col(col).head(s_dim) = states.col(i);
        out.inputs.col(col).tail(a_dim) = smp.actions.col(src);
        out.log_proposal(col) = smp.log_prob(src);
      }
    }
  }
  return out;
}

/// Per-state importance-sampled log-sum-exp of Q with self-normalised weights
/// w_ij = (1/q_ij) / sum_k (1/q_ik):
///   LSE_i = log sum_j w_ij exp(Q(s_i, a_ij)).
/// This differs from log sum_j exp(Q_ij - log q_ij - log K) by a term free of
/// Q, so critic gradients are the same, and a constant Q gives LSE = Q.
/// `softmax` holds dLSE_i/dQ_ij laid out like the samples.
template <typename Scalar>
struct LogSumExpTerms {
  VectorX<Scalar> lse;      // states
  VectorX<Scalar> softmax;  // states * per_state
};

template <typename Scalar>
LogSumExpTerms<Scalar> penalty_log_sum_exp(const VectorX<Scalar>& q, const PenaltySamples<Scalar>& ps) {
  if (ps.per_state < 1) throw Error(ErrorCode::Argument, "penalty needs at least one sampled action per state");
  if (q.size() != ps.states * ps.per_state) throw Error(ErrorCode::Shape, "one Q value per penalty sample is required");
  LogSumExpTerms<Scalar> t;
  t.lse.resize(ps.states);
  t.softmax.resize(q.size());
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  auto lse = [](const Array& z) {
    const Scalar m = z.maxCoeff();
    return m + std::log((z - m).exp().sum());
  };
  for (Index i = 0; i < ps.states; ++i) {
    const Array lw = -ps.log_proposal.segment(i * ps.per_state, ps.per_state).array();
    const Array z = q.segment(i * ps.per_state, ps.per_state).array() + lw;
    t.lse(i) = lse(z) - lse(lw);
    t.softmax.segment(i * ps.per_state, ps.per_state) = (z - lse(z)).exp().matrix();
  }
  return t;
}

/// Conservative penalty of one critic: sum_i omega_i LSE_i - mean offline Q.
template <typename Scalar>
Scalar conservative_penalty(const approx::Mlp<Scalar>& q, const PenaltySamples<Scalar>& ps, const VectorX<Scalar>& omega,
                            const core::Batch<Scalar>& offline) {
  if (omega.size() != ps.states) throw Error(ErrorCode::Shape, "one weight per model state is required");
  const VectorX<Scalar> qs = q.forward(ps.inputs).row(0).transpose();
  const auto t = penalty_log_sum_exp(qs, ps);
  return omega.dot(t.lse) - q_values(q, offline.states, offline.actions).mean();
}

/// Everything the critic step consumes, fixed before the loss is evaluated.
template <typename Scalar>
struct CriticStepInputs {
  core::Batch<Scalar> offline;
  core::Batch<Scalar> model;
  VectorX<Scalar> offline_targets;
  VectorX<Scalar> model_targets;
  VectorX<Scalar> omega;  // one weight per model sample
  PenaltySamples<Scalar> penalty;
};

struct CriticLossValue {
  double loss = 0;
  double mse_offline = 0;
  double mse_model = 0;
  double penalty = 0;
  double mean_q_offline = 0;
  double mean_q_model = 0;
};

/// 0.5 [f MSE_model + (1 - f) MSE_offline] + lambda * penalty for one critic,
/// with its parameter gradient accumulated into `grads` when non-null.
template <typename Scalar>
CriticLossValue critic_loss(const approx::Mlp<Scalar>& q, const CriticStepInputs<Scalar>& in, double lambda, double f,
                            std::type_identity_t<approx::Gradients<Scalar>>* grads) {
  if (!(f >= 0 && f <= 1)) throw Error(ErrorCode::Argument, "mixing fraction f must lie in [0, 1]");
  CriticLossValue v;
  const Scalar sf = static_cast<Scalar>(f), sl = static_cast<Scalar>(lambda);
  const Index n_off = in.offline.size(), n_mod = in.model.size();
  const bool use_penalty = lambda != 0;

  approx::ForwardCache<Scalar> c_off, c_mod, c_pen;
  MatrixX<Scalar> up_off, up_mod, up_pen;
  if (n_off > 0) {
    const VectorX<Scalar> qo = q.forward(stack_inputs(in.offline.states, in.offline.actions), c_off).row(0).transpose();
    const VectorX<Scalar> err = qo - in.offline_targets;
    v.mse_offline = static_cast<double>(err.squaredNorm()) / static_cast<double>(n_off);
    v.mean_q_offline = static_cast<double>(qo.mean());
    up_off = ((Scalar(1) - sf) * err / static_cast<Scalar>(n_off)).transpose();
    if (use_penalty) up_off.array() -= sl / static_cast<Scalar>(n_off);
  }
  if (n_mod > 0) {
    const VectorX<Scalar> qm = q.forward(stack_inputs(in.model.states, in.model.actions), c_mod).row(0).transpose();
    const VectorX<Scalar> err = qm - in.model_targets;
    v.mse_model = static_cast<double>(err.squaredNorm()) / static_cast<double>(n_mod);
    v.mean_q_model = static_cast<double>(qm.mean());
    up_mod = (sf * err / static_cast<Scalar>(n_mod)).transpose();
  }
  if (use_penalty) {
    if (n_off == 0) throw Error(ErrorCode::Argument, "penalty needs offline samples");
    if (in.omega.size() != in.penalty.states) throw Error(ErrorCode::Shape, "one weight per model state is required");
    const VectorX<Scalar> qp = q.forward(in.penalty.inputs, c_pen).row(0).transpose();
    const auto t = penalty_log_sum_exp(qp, in.penalty);
    v.penalty = static_cast<double>(in.omega.dot(t.lse)) - v.mean_q_offline;
    up_pen.resize(1, qp.size());
    for (Index i = 0; i < in.penalty.states; ++i)
      for (Index j = 0; j < in.penalty.per_state; ++j) {
        const Index col = i * in.penalty.per_state + j;
        up_pen(0, col) = sl * in.omega(i) * t.softmax(col);
      }
  }
  v.loss = 0.5 * (f * v.mse_model + (1 - f) * v.mse_offline) + lambda * v.penalty;
  require_finite(v.loss, "critic loss");
  if (grads) {
    if (n_off > 0) q.backward(c_off, up_off, *grads);
    if (n_mod > 0) q.backward(c_mod, up_mod, *grads);
    if (use_penalty) q.backward(c_pen, up_pen, *grads);
  }
  return v;
}

struct ActorLossValue {
  double loss = 0;
  double mean_log_prob = 0;
};

/// mean[alpha log pi(a|s) - min_k Q_k(s, a)] over reparameterised a ~ pi(.|s),
/// using a fixed draw `smp` made by actor.evaluate/sample on `states`.
template <typename Scalar>
ActorLossValue actor_loss(const CriticPair<Scalar>& c, const Actor<Scalar>& actor, double alpha,
                          const MatrixX<Scalar>& states, const ActorSample<Scalar>& smp,
                          std::type_identity_t<approx::Gradients<Scalar>>* grads) {
  const Index n = states.cols();
  if (n == 0) throw Error(ErrorCode::Argument, "actor loss needs states");
  if (!smp.log_prob.allFinite()) throw Error(ErrorCode::NonFinite, "non-finite policy log-probability");
  const MatrixX<Scalar> x = stack_inputs(states, smp.actions);
  std::array<approx::ForwardCache<Scalar>, 2> cache;
  const VectorX<Scalar> q0 = c.q[0].forward(x, cache[0]).row(0).transpose();
  const VectorX<Scalar> q1 = c.q[1].forward(x, cache[1]).row(0).transpose();
  const Scalar a = static_cast<Scalar>(alpha);
  ActorLossValue v;
  v.mean_log_prob = static_cast<double>(smp.log_prob.mean());
  v.loss = static_cast<double>((a * smp.log_prob - q0.cwiseMin(q1)).mean());
  require_finite(v.loss, "actor loss");
  if (grads) {
    // Ties go to critic 0; dL/dQ_min = -1/n on the chosen critic only.
    MatrixX<Scalar> up0 = MatrixX<Scalar>::Zero(1, n), up1 = MatrixX<Scalar>::Zero(1, n);
    for (Index j = 0; j < n; ++j) (q0(j) <= q1(j) ? up0 : up1)(0, j) = Scalar(-1) / static_cast<Scalar>(n);
    const MatrixX<Scalar> dx = c.q[0].input_gradient(cache[0], up0) + c.q[1].input_gradient(cache[1], up1);
    const MatrixX<Scalar> d_actions = dx.bottomRows(smp.actions.rows());
    const VectorX<Scalar> d_log_prob = VectorX<Scalar>::Constant(n, a / static_cast<Scalar>(n));
    actor.backward(smp, d_actions, d_log_prob, *grads);
  }
  return v;
}

}  // namespace midl::agent
