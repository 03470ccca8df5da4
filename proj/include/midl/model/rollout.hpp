#pragma once

#include "midl/core/batch.hpp"
#include "midl/model/ensemble.hpp"

#include <vector>

namespace midl::model {

/// Fixed-capacity FIFO store of model transitions tagged with their rollout step.
///
/// Each entry can also carry `probes` extra next-state draws from the model at
/// its (s, a), stacked into one column, and a scalar weight g (default 1).
template <typename Scalar>
class ModelBuffer {
 public:
  ModelBuffer(int state_dim, int action_dim, Index capacity, int probes = 0)
      : capacity_(capacity),
        probes_(probes),
        states_(state_dim, capacity),
        actions_(action_dim, capacity),
        rewards_(capacity),
        next_states_(state_dim, capacity),
        probe_states_(static_cast<Index>(probes) * state_dim, capacity),
        g_(VectorX<Scalar>::Ones(capacity)),
        steps_(static_cast<std::size_t>(capacity)) {
    if (capacity < 1) throw Error(ErrorCode::Config, "model buffer capacity must be positive");
    if (probes < 0) throw Error(ErrorCode::Config, "probe count must be nonnegative");
  }

  Index size() const { return size_; }
  Index capacity() const { return capacity_; }
  long total_added() const { return added_; }
  int probes() const { return probes_; }

  void add(const Eigen::Ref<const VectorX<Scalar>>& s, const Eigen::Ref<const VectorX<Scalar>>& a, Scalar r,
           const Eigen::Ref<const VectorX<Scalar>>& s2, int step,
           const Eigen::Ref<const VectorX<Scalar>>& probe = VectorX<Scalar>()) {
    if (probe.size() != probe_states_.rows()) throw Error(ErrorCode::Shape, "probe column has the wrong length");
    states_.col(head_) = s;
    actions_.col(head_) = a;
    rewards_(head_) = r;
    next_states_.col(head_) = s2;
    probe_states_.col(head_) = probe;
    g_(head_) = Scalar(1);
    steps_[static_cast<std::size_t>(head_)] = step;
    head_ = (head_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
    ++added_;
  }

  /// Entry i in insertion order among the retained entries (0 = oldest).
  Index slot(Index i) const { return size_ < capacity_ ? i : (head_ + i) % capacity_; }
  int step(Index i) const { return steps_[static_cast<std::size_t>(slot(i))]; }

  /// Probe draws of entry i: state_dim x probes.
  MatrixX<Scalar> probe_states(Index i) const {
    return probe_states_.col(slot(i)).reshaped(states_.rows(), probes_);
  }

  Scalar g(Index i) const { return g_(slot(i)); }
  VectorX<Scalar> g(const std::vector<Index>& idx) const {
    VectorX<Scalar> out(static_cast<Index>(idx.size()));
    for (Index j = 0; j < out.size(); ++j) out(j) = g_(slot(idx[static_cast<std::size_t>(j)]));
    return out;
  }
  /// Sets g of every retained entry, oldest first.
  void set_g(const VectorX<Scalar>& g) {
    if (g.size() != size_) throw Error(ErrorCode::Shape, "one g value per retained entry is required");
    for (Index i = 0; i < size_; ++i) g_(slot(i)) = g(i);
  }

  std::vector<Index> sample_indices(Index n, Rng& rng) const {
    if (size_ == 0) throw Error(ErrorCode::State, "cannot sample from an empty model buffer");
    std::uniform_int_distribution<Index> pick(0, size_ - 1);
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (auto& i : idx) i = pick(rng);
    return idx;
  }

  core::Batch<Scalar> gather(const std::vector<Index>& idx) const {
    core::Batch<Scalar> b;
    const Index n = static_cast<Index>(idx.size());
    b.states.resize(states_.rows(), n);
    b.actions.resize(actions_.rows(), n);
    b.rewards.resize(n);
    b.next_states.resize(states_.rows(), n);
    b.terminals = VectorX<Scalar>::Zero(n);
    for (Index j = 0; j < n; ++j) {
      const Index k = slot(idx[j]);
      b.states.col(j) = states_.col(k);
      b.actions.col(j) = actions_.col(k);
      b.rewards(j) = rewards_(k);
      b.next_states.col(j) = next_states_.col(k);
    }
    return b;
  }

  core::Batch<Scalar> sample(Index n, Rng& rng) const { return gather(sample_indices(n, rng)); }

  /// Every retained entry, oldest first.
  core::Batch<Scalar> contents() const {
    std::vector<Index> idx(static_cast<std::size_t>(size_));
    for (Index i = 0; i < size_; ++i) idx[static_cast<std::size_t>(i)] = i;
    return gather(idx);
  }

 private:
  Index capacity_;
  int probes_;
  MatrixX<Scalar> states_, actions_;
  VectorX<Scalar> rewards_;
  MatrixX<Scalar> next_states_;
  MatrixX<Scalar> probe_states_;
  VectorX<Scalar> g_;
  std::vector<int> steps_;
  Index head_ = 0, size_ = 0;
  long added_ = 0;
};

/// `m` next-state draws per column from the elite mixture of `pred`, stacked
/// into (m * state_dim) x B.
template <typename Scalar>
MatrixX<Scalar> sample_probes(const EnsemblePrediction<Scalar>& pred, int m, Rng& rng) {
  const Index s_dim = pred.next_state.rows(), n = pred.next_state.cols();
  const int elites = static_cast<int>(pred.elite_mean.size());
  std::uniform_int_distribution<int> pick(0, elites - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixX<Scalar> out(m * s_dim, n);
  for (Index j = 0; j < n; ++j)
    for (int k = 0; k < m; ++k) {
      const int e = pick(rng);
      for (Index d = 0; d < s_dim; ++d)
        out(k * s_dim + d, j) = pred.elite_mean[e](d, j) + pred.elite_std[e](d, j) * static_cast<Scalar>(normal(rng));
    }
  return out;
}

struct RolloutStats {
  long added = 0;
  long truncated = 0;  // trajectories cut short by non-finite model output
};

/// Starts `count` trajectories at dataset states drawn uniformly and simulates
/// H steps under `policy`, a callable (states, rng) -> actions. When the
/// buffer keeps probes, each stored transition also gets that many
/// independent next-state draws from the elite mixture at its (s, a).
template <typename Scalar, typename Policy>
RolloutStats rollout(const GaussianEnsemble<Scalar>& ens, Policy&& policy, const core::TransitionTable<Scalar>& data,
                     int horizon, Index count, ModelBuffer<Scalar>& buffer, Rng& rng) {
  if (horizon < 1) throw Error(ErrorCode::Argument, "rollout horizon must be at least 1");
  if (count < 1) throw Error(ErrorCode::Argument, "rollout count must be at least 1");
  std::uniform_int_distribution<Index> pick(0, data.size() - 1);
  MatrixX<Scalar> s(ens.state_dim(), count);
  for (Index j = 0; j < count; ++j) s.col(j) = data.all().states.col(pick(rng));
  std::vector<char> alive(static_cast<std::size_t>(count), 1);
  RolloutStats stats;
  for (int h = 1; h <= horizon; ++h) {
    const MatrixX<Scalar> a = policy(s, rng);
    const auto pred = ens.predict(s, a, rng);
    const MatrixX<Scalar> probe = buffer.probes() > 0 ? sample_probes(pred, buffer.probes(), rng) : MatrixX<Scalar>(0, count);
    for (Index j = 0; j < count; ++j) {
      if (!alive[static_cast<std::size_t>(j)]) continue;
      if (!pred.next_state.col(j).allFinite() || !std::isfinite(static_cast<double>(pred.reward(j)))) {
        alive[static_cast<std::size_t>(j)] = 0;
        ++stats.truncated;
        continue;
      }
      buffer.add(s.col(j), a.col(j), pred.reward(j), pred.next_state.col(j), h, probe.col(j));
      ++stats.added;
    }
    // Dead trajectories keep a finite placeholder state so the batch stays well formed.
    for (Index j = 0; j < count; ++j)
      if (alive[static_cast<std::size_t>(j)]) s.col(j) = pred.next_state.col(j);
  }
  return stats;
}

}  // namespace midl::model
