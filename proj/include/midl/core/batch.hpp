#pragma once

#include "midl/core/dataset.hpp"

#include <vector>

namespace midl::core {

/// Column-stacked transitions.
template <typename Scalar>
struct Batch {
  MatrixX<Scalar> states;       // s_dim x B
  MatrixX<Scalar> actions;      // a_dim x B
  VectorX<Scalar> rewards;      // B
  MatrixX<Scalar> next_states;  // s_dim x B
  VectorX<Scalar> terminals;    // B, 0 or 1

  Index size() const { return states.cols(); }
};

/// Dataset in column form, so minibatches are column gathers.
template <typename Scalar>
class TransitionTable {
 public:
  TransitionTable() = default;
  explicit TransitionTable(const OfflineDataset& data) {
    all_.states = data.states().cast<Scalar>();
    all_.actions = data.actions().cast<Scalar>();
    all_.rewards = data.rewards().cast<Scalar>();
    all_.next_states = data.next_states().cast<Scalar>();
    all_.terminals.resize(static_cast<Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) all_.terminals(static_cast<Index>(i)) = data[i].terminal ? 1 : 0;
  }

  Index size() const { return all_.size(); }
  const Batch<Scalar>& all() const { return all_; }

  Batch<Scalar> gather(const std::vector<Index>& idx) const {
    Batch<Scalar> b;
    const Index n = static_cast<Index>(idx.size());
    b.states.resize(all_.states.rows(), n);
    b.actions.resize(all_.actions.rows(), n);
    b.rewards.resize(n);
    b.next_states.resize(all_.next_states.rows(), n);
    b.terminals.resize(n);
    for (Index j = 0; j < n; ++j) {
      const Index i = idx[j];
      b.states.col(j) = all_.states.col(i);
      b.actions.col(j) = all_.actions.col(i);
      b.rewards(j) = all_.rewards(i);
      b.next_states.col(j) = all_.next_states.col(i);
      b.terminals(j) = all_.terminals(i);
    }
    return b;
  }

  /// Uniform with replacement.
  Batch<Scalar> sample(Index n, Rng& rng) const {
    if (size() == 0) throw Error(ErrorCode::State, "cannot sample from an empty table");
    std::uniform_int_distribution<Index> pick(0, size() - 1);
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (auto& i : idx) i = pick(rng);
    return gather(idx);
  }

 private:
  Batch<Scalar> all_;
};

}  // namespace midl::core
