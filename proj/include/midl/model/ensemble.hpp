#pragma once

#include "midl/approx/adam.hpp"
#include "midl/approx/gaussian.hpp"
#include "midl/core/dataset.hpp"
#include "midl/model/normalizer.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace midl::model {

struct EnsembleConfig {
  int members = 7;
  int elites = 5;
  int hidden = 200;
  int layers = 4;
  int batch_size = 256;
  double learning_rate = 1e-4;
  int epochs = 400;
  double validation_fraction = 0.1;
  approx::LogStdClamp clamp;
};

template <typename Scalar>
struct EnsembleMember {
  approx::Mlp<Scalar> net;
  std::vector<double> train_nll;       // mean minibatch NLL per epoch
  std::vector<double> validation_nll;  // per epoch; empty without a validation split
};

/// Indices of the `count` smallest losses, ordered by (loss, index).
inline std::vector<int> select_elites(const std::vector<double>& losses, int count) {
  if (count < 1 || count > static_cast<int>(losses.size())) {
    throw Error(ErrorCode::Argument, "cannot select " + std::to_string(count) + " elites from " +
                                         std::to_string(losses.size()) + " members");
  }
  std::vector<int> order(losses.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return losses[a] < losses[b]; });
  order.resize(count);
  return order;
}

/// Model inputs (s; a) and targets (s' - s; r), one column per transition.
template <typename Scalar>
struct ModelData {
  MatrixX<Scalar> inputs;
  MatrixX<Scalar> targets;

  Index size() const { return inputs.cols(); }

  ModelData subset(const std::vector<Index>& idx) const {
    ModelData out;
    out.inputs.resize(inputs.rows(), static_cast<Index>(idx.size()));
    out.targets.resize(targets.rows(), static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      out.inputs.col(static_cast<Index>(j)) = inputs.col(idx[j]);
      out.targets.col(static_cast<Index>(j)) = targets.col(idx[j]);
    }
    return out;
  }
};

template <typename Scalar>
ModelData<Scalar> make_model_data(const core::OfflineDataset& data) {
  if (data.empty()) throw Error(ErrorCode::Dataset, "cannot train a model on an empty dataset");
  const Matrix s = data.states(), a = data.actions(), s2 = data.next_states();
  const Vector r = data.rewards();
  ModelData<Scalar> out;
  out.inputs.resize(s.rows() + a.rows(), s.cols());
  out.inputs << s.cast<Scalar>(), a.cast<Scalar>();
  out.targets.resize(s.rows() + 1, s.cols());
  out.targets << (s2 - s).cast<Scalar>(), r.transpose().cast<Scalar>();
  return out;
}

/// One Adam step of mean Gaussian NLL on already-normalised inputs. Returns
/// the pre-step loss.
template <typename Scalar>
double gaussian_fit_step(approx::Mlp<Scalar>& net, approx::Adam<Scalar>& opt, const MatrixX<Scalar>& inputs,
                         const MatrixX<Scalar>& targets, const approx::LogStdClamp& clamp) {
  approx::ForwardCache<Scalar> cache;
  const MatrixX<Scalar> raw = net.forward(inputs, cache);
  const auto head = approx::split_gaussian(raw, clamp);
  MatrixX<Scalar> d_mean, d_log_std;
  const Scalar loss = approx::gaussian_nll(head, targets, &d_mean, &d_log_std);
  require_finite(static_cast<double>(loss), "model NLL");
  auto grads = net.zero_gradients();
  net.backward(cache, approx::gaussian_head_backward(head, d_mean, d_log_std, clamp), grads);
  opt.step(net, grads);
  return static_cast<double>(loss);
}

template <typename Scalar>
struct EnsemblePrediction {
  MatrixX<Scalar> next_state;  // s_dim x B
  VectorX<Scalar> reward;      // B
  std::vector<int> chosen;     // position in the elite list used for each column
  /// Per elite: mean and std of (s', r), absolute next state rather than delta.
  std::vector<MatrixX<Scalar>> elite_mean;
  std::vector<MatrixX<Scalar>> elite_std;
};

/// N diagonal-Gaussian dynamics members predicting (s' - s, r) from
/// normalised (s, a), with an elite subset used for prediction.
template <typename Scalar>
class GaussianEnsemble {
 public:
  using MatrixType = MatrixX<Scalar>;

  GaussianEnsemble() = default;

  GaussianEnsemble(int state_dim, int action_dim, const EnsembleConfig& cfg, Rng& rng)
      : state_dim_(state_dim), action_dim_(action_dim), clamp_(cfg.clamp) {
    if (cfg.members < 1 || cfg.elites < 1 || cfg.elites > cfg.members) {
      throw Error(ErrorCode::Config, "ensemble needs 1 <= elites <= members");
    }
    if (cfg.layers < 1 || cfg.hidden < 1) throw Error(ErrorCode::Config, "ensemble needs hidden layers");
    std::vector<int> sizes{state_dim + action_dim};
    for (int l = 0; l < cfg.layers; ++l) sizes.push_back(cfg.hidden);
    sizes.push_back(2 * (state_dim + 1));
    members_.resize(cfg.members);
    for (auto& m : members_) m.net = approx::Mlp<Scalar>(sizes, approx::Activation::Relu, approx::Activation::Linear, rng);
    input_norm_ = Normalizer<Scalar>::identity(state_dim + action_dim);
  }

  static GaussianEnsemble from_parts(int state_dim, int action_dim, approx::LogStdClamp clamp,
                                     std::vector<EnsembleMember<Scalar>> members, Normalizer<Scalar> norm,
                                     std::vector<int> elites) {
    GaussianEnsemble e;
    e.state_dim_ = state_dim;
    e.action_dim_ = action_dim;
    e.clamp_ = clamp;
    e.members_ = std::move(members);
    for (const auto& m : e.members_) {
      if (m.net.input_dim() != state_dim + action_dim || m.net.output_dim() != 2 * (state_dim + 1))
        throw Error(ErrorCode::Shape, "ensemble member shape does not match state/action dims");
    }
    if (norm.dim() != state_dim + action_dim) throw Error(ErrorCode::Shape, "normalizer dimension mismatch");
    e.input_norm_ = std::move(norm);
    e.set_elites(std::move(elites));
    return e;
  }

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  int size() const { return static_cast<int>(members_.size()); }
  const approx::LogStdClamp& clamp() const { return clamp_; }
  void set_clamp(const approx::LogStdClamp& c) { clamp_ = c; }

  std::vector<EnsembleMember<Scalar>>& members() { return members_; }
  const std::vector<EnsembleMember<Scalar>>& members() const { return members_; }
  const std::vector<int>& elites() const { return elites_; }
  Normalizer<Scalar>& input_normalizer() { return input_norm_; }
  const Normalizer<Scalar>& input_normalizer() const { return input_norm_; }

  void set_elites(std::vector<int> elites) {
    std::vector<int> sorted = elites;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.empty() || std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() ||
        sorted.front() < 0 || sorted.back() >= size()) {
      throw Error(ErrorCode::Argument, "elite indices must be distinct member indices");
    }
    elites_ = std::move(elites);
  }

  /// Same ensemble in another scalar type.
  template <typename Other>
  GaussianEnsemble<Other> cast() const {
    std::vector<EnsembleMember<Other>> members;
    for (const auto& m : members_) members.push_back({m.net.template cast<Other>(), m.train_nll, m.validation_nll});
    return GaussianEnsemble<Other>::from_parts(state_dim_, action_dim_, clamp_, std::move(members),
                                               input_norm_.template cast<Other>(), elites_);
  }

  MatrixType stack_inputs(const MatrixType& s, const MatrixType& a) const {
    if (s.rows() != state_dim_ || a.rows() != action_dim_ || s.cols() != a.cols()) {
      throw Error(ErrorCode::Shape, "ensemble input shape mismatch");
    }
    MatrixType x(s.rows() + a.rows(), s.cols());
    x << s, a;
    return x;
  }

  /// Head of member k over (delta, reward) for raw (s, a).
  approx::GaussianHead<Scalar> member_head(int k, const MatrixType& s, const MatrixType& a) const {
    return approx::split_gaussian(members_.at(k).net.forward(input_norm_.normalize(stack_inputs(s, a))), clamp_);
  }

  /// Per-sample NLL of member k on (delta, reward) targets.
  VectorX<Scalar> member_nll(int k, const MatrixType& s, const MatrixType& a, const MatrixType& targets) const {
    const auto h = member_head(k, s, a);
    return approx::gaussian_nll_per_sample(h.mean, h.log_std, targets);
  }

  /// Samples (s', r) per column from a uniformly chosen elite.
  EnsemblePrediction<Scalar> predict(const MatrixType& s, const MatrixType& a, Rng& rng) const {
    if (elites_.empty()) throw Error(ErrorCode::State, "ensemble has no selected elites");
    const Index batch = s.cols();
    EnsemblePrediction<Scalar> out;
    out.elite_mean.reserve(elites_.size());
    out.elite_std.reserve(elites_.size());
    for (int k : elites_) {
      const auto h = member_head(k, s, a);
      MatrixType mean = h.mean;
      mean.topRows(state_dim_) += s;
      out.elite_mean.push_back(std::move(mean));
      out.elite_std.push_back(h.std_dev());
    }
    out.next_state.resize(state_dim_, batch);
    out.reward.resize(batch);
    out.chosen.resize(batch);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(elites_.size()) - 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index j = 0; j < batch; ++j) {
      const int e = pick(rng);
      out.chosen[j] = e;
      for (int d = 0; d <= state_dim_; ++d) {
        const Scalar v = out.elite_mean[e](d, j) + out.elite_std[e](d, j) * static_cast<Scalar>(normal(rng));
        if (d < state_dim_) out.next_state(d, j) = v;
        else out.reward(j) = v;
      }
    }
    return out;
  }

 private:
  int state_dim_ = 0;
  int action_dim_ = 0;
  approx::LogStdClamp clamp_;
  std::vector<EnsembleMember<Scalar>> members_;
  std::vector<int> elites_;
  Normalizer<Scalar> input_norm_;
};

/// Splits off a validation set, trains every member by minibatch MLE on its
/// own bootstrap resample of the remaining data, then keeps the members with
/// the lowest final validation NLL as elites.
template <typename Scalar>
GaussianEnsemble<Scalar> train_ensemble(const core::OfflineDataset& data, const EnsembleConfig& cfg, Rng& rng) {
  if (cfg.batch_size < 1 || cfg.epochs < 0 || cfg.learning_rate < 0 || cfg.validation_fraction < 0 ||
      cfg.validation_fraction >= 1) {
    throw Error(ErrorCode::Config, "invalid ensemble training configuration");
  }
  const auto all = make_model_data<Scalar>(data);
  GaussianEnsemble<Scalar> ens(static_cast<int>(data.state_dim()), static_cast<int>(data.action_dim()), cfg, rng);

  std::vector<Index> order(all.size());
  std::iota(order.begin(), order.end(), Index(0));
  std::shuffle(order.begin(), order.end(), rng);
  Index n_val = static_cast<Index>(cfg.validation_fraction * static_cast<double>(all.size()));
  if (all.size() - n_val < 1) n_val = 0;
  const ModelData<Scalar> val = all.subset({order.begin(), order.begin() + n_val});
  const ModelData<Scalar> train = all.subset({order.begin() + n_val, order.end()});

  ens.input_normalizer() = Normalizer<Scalar>::fit(train.inputs);
  const MatrixX<Scalar> val_in = ens.input_normalizer().normalize(val.inputs);
  const MatrixX<Scalar> train_in = ens.input_normalizer().normalize(train.inputs);
  const MatrixX<Scalar>& val_out = val.targets;
  const MatrixX<Scalar>& train_out = train.targets;

  std::vector<double> final_loss(ens.size());
  for (int k = 0; k < ens.size(); ++k) {
    auto& member = ens.members()[k];
    Rng member_rng(rng());
    std::uniform_int_distribution<Index> draw(0, train.size() - 1);
    std::vector<Index> boot(train.size());
    for (auto& i : boot) i = draw(member_rng);
    approx::Adam<Scalar> opt(member.net, {cfg.learning_rate});

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(boot.begin(), boot.end(), member_rng);
      double sum = 0;
      int batches = 0;
      for (std::size_t start = 0; start < boot.size(); start += cfg.batch_size) {
        const std::size_t stop = std::min(boot.size(), start + static_cast<std::size_t>(cfg.batch_size));
        MatrixX<Scalar> x(train_in.rows(), static_cast<Index>(stop - start));
        MatrixX<Scalar> y(train.targets.rows(), x.cols());
        for (std::size_t j = start; j < stop; ++j) {
          x.col(static_cast<Index>(j - start)) = train_in.col(boot[j]);
          y.col(static_cast<Index>(j - start)) = train_out.col(boot[j]);
        }
        try {
          sum += gaussian_fit_step(member.net, opt, x, y, cfg.clamp);
        } catch (const Error& e) {
          throw Error(e.code(), std::string(e.what()) + " (member " + std::to_string(k) + ", epoch " +
                                    std::to_string(epoch) + ")");
        }
        ++batches;
      }
      member.train_nll.push_back(sum / batches);
      if (n_val > 0) {
        const auto h = approx::split_gaussian(member.net.forward(val_in), cfg.clamp);
        member.validation_nll.push_back(static_cast<double>(approx::gaussian_nll(h, val_out)));
      }
    }
    if (n_val > 0) {
      const auto h = approx::split_gaussian(member.net.forward(val_in), cfg.clamp);
      final_loss[k] = static_cast<double>(approx::gaussian_nll(h, val_out));
    } else {
      const auto h = approx::split_gaussian(member.net.forward(train_in), cfg.clamp);
      final_loss[k] = static_cast<double>(approx::gaussian_nll(h, train_out));
    }
  }
  ens.set_elites(select_elites(final_loss, cfg.elites));
  return ens;
}

/// Text checkpoint: header, clamp, normaliser, elites, then one MLP block per
/// member in the approx checkpoint format.
void save_ensemble(const std::string& path, const GaussianEnsemble<double>& ens);
GaussianEnsemble<double> load_ensemble(const std::string& path);

}  // namespace midl::model
