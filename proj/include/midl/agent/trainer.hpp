#pragma once

#include "midl/agent/losses.hpp"
#include "midl/model/rollout.hpp"
#include "midl/ratio/weights.hpp"

#include <cmath>
#include <cstdint>
#include <limits>

namespace midl::agent {

struct AgentConfig {
  int hidden = 256;
  int hidden_layers = 2;
  double actor_lr = 1e-4;
  double critic_lr = 3e-4;
  double alpha_lr = 3e-3;
  double initial_alpha = 1.0;
  /// NaN means -dim(A).
  double target_entropy = std::numeric_limits<double>::quiet_NaN();
  double gamma = 0.99;
  double tau = 5e-3;
  int soft_update_every = 1;
  double lambda = 5.0;
  double mix_fraction = 0.5;  // f: share of each batch drawn from model data
  int batch_size = 256;
  int penalty_uniform_actions = 10;
  int penalty_actor_actions = 10;
  ActionBox box;
  approx::LogStdClamp actor_log_std{-5.0, 2.0};
};

struct TrainerConfig {
  AgentConfig agent;
  int horizon = 5;
  int rollout_every = 250;
  Index rollout_count = 1000;
  Index buffer_capacity = 50000;
  int discriminator_steps = 50;
  int probes = 10;  // m: model next-state draws per (s, a) for g
  ratio::GMode g_mode = ratio::GMode::ReverseKl;
  ratio::DiscriminatorConfig discriminator;
  ratio::ClipRanges clips;
};

struct MetricsRecord {
  long iter = 0;
  double critic_loss = 0;
  double actor_loss = 0;
  double alpha = 0;
  double mean_q_offline = 0;
  double mean_q_model = 0;
  double penalty = 0;
  double omega_entropy = 0;
  // Batch weight diagnostics; not part of the metrics file.
  double omega_sum = 0;
  double g_min = 0;
  double g_max = 0;
};

/// Owns every mutable component of one training run. Each call to iterate()
/// performs: rollouts + discriminator refresh + g recomputation on the
/// configured cadence, one actor/alpha step, one step per critic, and the soft
/// target update.
template <typename Scalar>
class Trainer {
 public:
  Trainer(model::GaussianEnsemble<Scalar> ens, const core::OfflineDataset& data, const TrainerConfig& cfg,
          std::uint64_t seed)
      : cfg_(cfg),
        ens_(std::move(ens)),
        table_(data),
        buffer_(ens_.state_dim(), ens_.action_dim(), cfg.buffer_capacity, cfg.probes),
        rng_(seed) {
    validate();
    const int s_dim = ens_.state_dim(), a_dim = ens_.action_dim();
    if (data.state_dim() != s_dim || data.action_dim() != a_dim) {
      throw Error(ErrorCode::Shape, "dataset and world model dimensions differ");
    }
    const AgentConfig& ac = cfg.agent;
    actor_ = Actor<Scalar>(s_dim, a_dim, ac.hidden, ac.hidden_layers, ac.box, ac.actor_log_std, ac.actor_lr, rng_);
    critics_ = CriticPair<Scalar>(s_dim, a_dim, ac.hidden, ac.hidden_layers, ac.critic_lr, ac.tau, rng_);
    const double target = std::isnan(ac.target_entropy) ? -static_cast<double>(a_dim) : ac.target_entropy;
    entropy_ = EntropyCoef(ac.initial_alpha, target, ac.alpha_lr);
    disc_ = ratio::DiscriminatorPair<Scalar>(s_dim, a_dim, cfg.discriminator, rng_, cfg.clips);
    disc_.fit_normalizers(table_.all());
  }

  long iteration() const { return iter_; }
  const TrainerConfig& config() const { return cfg_; }
  Actor<Scalar>& actor() { return actor_; }
  const Actor<Scalar>& actor() const { return actor_; }
  CriticPair<Scalar>& critics() { return critics_; }
  const CriticPair<Scalar>& critics() const { return critics_; }
  EntropyCoef& entropy() { return entropy_; }
  const EntropyCoef& entropy() const { return entropy_; }
  ratio::DiscriminatorPair<Scalar>& discriminators() { return disc_; }
  const ratio::DiscriminatorPair<Scalar>& discriminators() const { return disc_; }
  const model::ModelBuffer<Scalar>& buffer() const { return buffer_; }
  const model::GaussianEnsemble<Scalar>& ensemble() const { return ens_; }
  const core::TransitionTable<Scalar>& offline() const { return table_; }
  Rng& rng() { return rng_; }

  /// Rollouts under the current actor, discriminator training on offline vs
  /// buffer data, then g for every retained model transition.
  void refresh() {
    auto policy = [this](const MatrixX<Scalar>& s, Rng& r) { return actor_.sample(s, r).actions; };
    model::rollout(ens_, policy, table_, cfg_.horizon, cfg_.rollout_count, buffer_, rng_);
    const auto contents = buffer_.contents();
    ratio::train_discriminators(disc_, table_.all(), contents, cfg_.discriminator_steps, rng_);
    MatrixX<Scalar> probes(static_cast<Index>(cfg_.probes) * ens_.state_dim(), buffer_.size());
    for (Index i = 0; i < buffer_.size(); ++i) probes.col(i) = buffer_.probe_states(i).reshaped();
    buffer_.set_g(ratio::g_from_probes(disc_, contents.states, contents.actions, probes, cfg_.g_mode));
  }

  MetricsRecord iterate() {
    const AgentConfig& ac = cfg_.agent;
    const Index n_model = model_batch_size(), n_off = ac.batch_size - n_model;
    if (n_model > 0 && iter_ % cfg_.rollout_every == 0) refresh();

    CriticStepInputs<Scalar> in;
    in.offline = table_.sample(n_off, rng_);
    ratio::SamplingWeights<Scalar> w;
    if (n_model > 0) {
      const auto idx = buffer_.sample_indices(n_model, rng_);
      in.model = buffer_.gather(idx);
      w = ratio::normalize_weights<Scalar>(buffer_.g(idx), cfg_.clips.g_lo);
    } else {
      in.model = table_.sample(0, rng_);
    }

    // Actor and alpha on the states of both batches.
    MatrixX<Scalar> states(in.offline.states.rows(), n_off + n_model);
    states << in.offline.states, in.model.states;
    const auto smp = actor_.sample(states, rng_);
    auto a_grads = actor_.net().zero_gradients();
    const auto av = actor_loss(critics_, actor_, entropy_.alpha(), states, smp, &a_grads);
    actor_.apply(a_grads);
    entropy_.update(av.mean_log_prob);

    // Critics share targets and penalty samples.
    const double alpha = entropy_.alpha();
    in.offline_targets = bellman_target(critics_, actor_, alpha, ac.gamma, in.offline, rng_);
    if (n_model > 0) {
      in.model_targets = bellman_target(critics_, actor_, alpha, ac.gamma, in.model, rng_);
      in.omega = w.omega;
      if (ac.lambda != 0) {
        in.penalty =
            draw_penalty_actions(actor_, in.model.states, ac.penalty_uniform_actions, ac.penalty_actor_actions, rng_);
      }
    }
    MetricsRecord rec;
    rec.iter = iter_;
    for (int k = 0; k < 2; ++k) {
      auto g = critics_.q[k].zero_gradients();
      const auto cv = critic_loss(critics_.q[k], in, ac.lambda, ac.mix_fraction, &g);
      critics_.opt[k].step(critics_.q[k], g);
      rec.critic_loss += 0.5 * cv.loss;
      rec.mean_q_offline += 0.5 * cv.mean_q_offline;
      rec.mean_q_model += 0.5 * cv.mean_q_model;
      rec.penalty += 0.5 * cv.penalty;
    }
    if ((iter_ + 1) % ac.soft_update_every == 0) soft_update(critics_, critics_.tau);

    rec.actor_loss = av.loss;
    rec.alpha = alpha;
    if (n_model > 0) {
      rec.omega_entropy = w.entropy();
      rec.omega_sum = static_cast<double>(w.omega.template cast<double>().sum());
      rec.g_min = static_cast<double>(w.g.minCoeff());
      rec.g_max = static_cast<double>(w.g.maxCoeff());
    }
    for (double v : {rec.critic_loss, rec.actor_loss, rec.alpha, rec.mean_q_offline, rec.mean_q_model, rec.penalty,
                     rec.omega_entropy})
      require_finite(v, "training metric");
    ++iter_;
    return rec;
  }

  Index model_batch_size() const {
    return static_cast<Index>(std::llround(cfg_.agent.mix_fraction * cfg_.agent.batch_size));
  }

 private:
  void validate() const {
    const AgentConfig& ac = cfg_.agent;
    if (!(ac.gamma >= 0 && ac.gamma < 1)) throw Error(ErrorCode::Config, "gamma must lie in [0, 1)");
    if (!(ac.mix_fraction >= 0 && ac.mix_fraction <= 1)) throw Error(ErrorCode::Config, "f must lie in [0, 1]");
    if (ac.batch_size < 2) throw Error(ErrorCode::Config, "batch size must be at least 2");
    if (!(ac.lambda >= 0)) throw Error(ErrorCode::Config, "lambda must be nonnegative");
    if (ac.soft_update_every < 1 || cfg_.rollout_every < 1) throw Error(ErrorCode::Config, "periods must be positive");
    if (cfg_.probes < 1) throw Error(ErrorCode::Config, "m must be at least 1");
    if (ac.lambda > 0 && std::llround(ac.mix_fraction * ac.batch_size) == 0) {
      throw Error(ErrorCode::Config, "the penalty needs model samples (f * batch >= 1)");
    }
    if (std::llround(ac.mix_fraction * ac.batch_size) == ac.batch_size) {
      throw Error(ErrorCode::Config, "the penalty needs offline samples (f < 1)");
    }
  }

  TrainerConfig cfg_;
  model::GaussianEnsemble<Scalar> ens_;
  core::TransitionTable<Scalar> table_;
  model::ModelBuffer<Scalar> buffer_;
  Rng rng_;
  Actor<Scalar> actor_;
  CriticPair<Scalar> critics_;
  EntropyCoef entropy_;
  ratio::DiscriminatorPair<Scalar> disc_;
  long iter_ = 0;
};

/// min_k Q_k(s, a) over an action grid at a fixed state.
template <typename Scalar>
VectorX<Scalar> q_curve(const CriticPair<Scalar>& c, const VectorX<Scalar>& state, const VectorX<Scalar>& grid) {
  const Index n = grid.size();
  const MatrixX<Scalar> s = state.replicate(1, n);
  const MatrixX<Scalar> a = grid.transpose();
  return q_values(c.q[0], s, a).cwiseMin(q_values(c.q[1], s, a));
}

/// Policy entropy estimate -E[log pi(a|s)] over the given states.
template <typename Scalar>
double policy_entropy(const Actor<Scalar>& actor, const MatrixX<Scalar>& states, int draws, Rng& rng) {
  double acc = 0;
  for (int k = 0; k < draws; ++k) acc -= static_cast<double>(actor.sample(states, rng).log_prob.mean());
  return acc / draws;
}

}  // namespace midl::agent
