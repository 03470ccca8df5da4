#pragma once

#include "midl/approx/adam.hpp"
#include "midl/core/batch.hpp"
#include "midl/model/normalizer.hpp"

#include <cmath>

namespace midl::ratio {

/// Class 0 is offline data, class 1 is model data.
inline constexpr int kOffline = 0;
inline constexpr int kModel = 1;

inline constexpr double kRatioFloor = 1e-45;
inline constexpr double kRatioCeil = 1.0;
inline constexpr double kGFloor = 1e-45;
inline constexpr double kGCeil = 10.0;

/// Clip ranges for the dynamics ratio and for g.
struct ClipRanges {
  double ratio_lo = kRatioFloor;
  double ratio_hi = kRatioCeil;
  double g_lo = kGFloor;
  double g_hi = kGCeil;
};

struct DiscriminatorConfig {
  int hidden = 256;
  int hidden_layers = 1;
  double learning_rate = 3e-4;
  double logit_scale = 2.0;  // logits = scale * tanh(.)
  int batch_size = 256;
};

/// Two-class source classifier: an MLP with tanh output scaled to
/// [-logit_scale, logit_scale], followed by a softmax.
template <typename Scalar>
class Discriminator {
 public:
  using MatrixType = MatrixX<Scalar>;

  Discriminator() = default;
  Discriminator(int input_dim, const DiscriminatorConfig& cfg, Rng& rng)
      : scale_(static_cast<Scalar>(cfg.logit_scale)), norm_(model::Normalizer<Scalar>::identity(input_dim)) {
    std::vector<int> sizes{input_dim};
    for (int l = 0; l < cfg.hidden_layers; ++l) sizes.push_back(cfg.hidden);
    sizes.push_back(2);
    net_ = approx::Mlp<Scalar>(sizes, approx::Activation::Relu, approx::Activation::Tanh, rng);
    opt_ = approx::Adam<Scalar>(net_, {cfg.learning_rate});
  }

  static Discriminator from_parts(approx::Mlp<Scalar> net, model::Normalizer<Scalar> norm, double logit_scale,
                                  double learning_rate) {
    if (net.output_dim() != 2 || norm.dim() != net.input_dim()) {
      throw Error(ErrorCode::Shape, "discriminator parts have inconsistent shapes");
    }
    Discriminator d;
    d.scale_ = static_cast<Scalar>(logit_scale);
    d.net_ = std::move(net);
    d.opt_ = approx::Adam<Scalar>(d.net_, {learning_rate});
    d.norm_ = std::move(norm);
    return d;
  }

  int input_dim() const { return net_.input_dim(); }
  approx::Mlp<Scalar>& net() { return net_; }
  const approx::Mlp<Scalar>& net() const { return net_; }
  approx::Adam<Scalar>& optimizer() { return opt_; }
  model::Normalizer<Scalar>& normalizer() { return norm_; }
  const model::Normalizer<Scalar>& normalizer() const { return norm_; }
  Scalar logit_scale() const { return scale_; }

  /// 2 x B logits in [-scale, scale].
  MatrixType logits(const MatrixType& x) const { return scale_ * net_.forward(norm_.normalize(x)); }

  /// 2 x B class probabilities.
  MatrixType probabilities(const MatrixType& x) const { return softmax(logits(x)); }

  /// log p(model|x) - log p(offline|x), per column.
  VectorX<Scalar> log_odds(const MatrixType& x) const {
    const MatrixType z = logits(x);
    return (z.row(kModel) - z.row(kOffline)).transpose();
  }

  /// Mean cross-entropy on each source; the training objective is their sum.
  std::pair<double, double> loss(const MatrixType& offline, const MatrixType& model) const {
    return {mean_ce(logits(offline), kOffline), mean_ce(logits(model), kModel)};
  }

  /// E_off[-log p_off] + E_model[-log p_model]; accumulates its parameter
  /// gradient into `grads`.
  double loss_and_gradient(const MatrixType& offline, const MatrixType& model, approx::Gradients<Scalar>& grads) const {
    double total = 0;
    for (int label : {kOffline, kModel}) {
      const MatrixType& x = label == kOffline ? offline : model;
      if (x.cols() == 0) throw Error(ErrorCode::Argument, "discriminator batches must be nonempty");
      approx::ForwardCache<Scalar> cache;
      const MatrixType z = scale_ * net_.forward(norm_.normalize(x), cache);
      total += mean_ce(z, label);
      MatrixType d = softmax(z);
      d.row(label).array() -= Scalar(1);
      d *= scale_ / static_cast<Scalar>(x.cols());
      net_.backward(cache, d, grads);
    }
    return total;
  }

  /// One Adam step on the two-source cross-entropy. Returns the pre-step loss.
  double train_step(const MatrixType& offline, const MatrixType& model) {
    auto grads = net_.zero_gradients();
    const double total = loss_and_gradient(offline, model, grads);
    require_finite(total, "discriminator loss");
    opt_.step(net_, grads);
    return total;
  }

  static MatrixType softmax(const MatrixType& z) {
    MatrixType p(2, z.cols());
    for (Index j = 0; j < z.cols(); ++j) {
      const Scalar m = std::max(z(0, j), z(1, j));
      const Scalar e0 = std::exp(z(0, j) - m), e1 = std::exp(z(1, j) - m);
      p(0, j) = e0 / (e0 + e1);
      p(1, j) = e1 / (e0 + e1);
    }
    return p;
  }

 private:
  static double mean_ce(const MatrixType& z, int label) {
    double acc = 0;
    for (Index j = 0; j < z.cols(); ++j) {
      const double a = static_cast<double>(z(0, j)), b = static_cast<double>(z(1, j));
      const double m = std::max(a, b);
      const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
      acc += lse - static_cast<double>(z(label, j));
    }
    return acc / static_cast<double>(z.cols());
  }

  Scalar scale_ = Scalar(2);
  approx::Mlp<Scalar> net_;
  approx::Adam<Scalar> opt_;
  model::Normalizer<Scalar> norm_;
};

template <typename Scalar>
MatrixX<Scalar> stack_sa(const MatrixX<Scalar>& s, const MatrixX<Scalar>& a) {
  MatrixX<Scalar> x(s.rows() + a.rows(), s.cols());
  x << s, a;
  return x;
}

template <typename Scalar>
MatrixX<Scalar> stack_sas(const MatrixX<Scalar>& s, const MatrixX<Scalar>& a, const MatrixX<Scalar>& s2) {
  MatrixX<Scalar> x(s.rows() + a.rows() + s2.rows(), s.cols());
  x << s, a, s2;
  return x;
}

struct DiscriminatorLosses {
  double sas = 0;
  double sa = 0;
};

/// D_sas over (s, a, s') and D_sa over (s, a).
template <typename Scalar>
struct DiscriminatorPair {
  Discriminator<Scalar> sas;
  Discriminator<Scalar> sa;
  int batch_size = 256;
  ClipRanges clips;

  DiscriminatorPair() = default;
  DiscriminatorPair(int state_dim, int action_dim, const DiscriminatorConfig& cfg, Rng& rng, ClipRanges clips_ = {})
      : sas(2 * state_dim + action_dim, cfg, rng), sa(state_dim + action_dim, cfg, rng), batch_size(cfg.batch_size),
        clips(clips_) {}

  /// Fits input standardisation to the offline data.
  void fit_normalizers(const core::Batch<Scalar>& offline) {
    sas.normalizer() = model::Normalizer<Scalar>::fit(stack_sas(offline.states, offline.actions, offline.next_states));
    sa.normalizer() = model::Normalizer<Scalar>::fit(stack_sa(offline.states, offline.actions));
  }

  DiscriminatorLosses loss(const core::Batch<Scalar>& offline, const core::Batch<Scalar>& model) const {
    const auto a = sas.loss(stack_sas(offline.states, offline.actions, offline.next_states),
                            stack_sas(model.states, model.actions, model.next_states));
    const auto b = sa.loss(stack_sa(offline.states, offline.actions), stack_sa(model.states, model.actions));
    return {a.first + a.second, b.first + b.second};
  }

  /// log of p(m|s,a,s') p(o|s,a) / (p(o|s,a,s') p(m|s,a)), unclipped.
  VectorX<Scalar> log_raw_ratio(const MatrixX<Scalar>& s, const MatrixX<Scalar>& a, const MatrixX<Scalar>& s2) const {
    return sas.log_odds(stack_sas(s, a, s2)) - sa.log_odds(stack_sa(s, a));
  }

  /// Dynamics ratio clipped to [ratio_lo, ratio_hi] (default [1e-45, 1]).
  VectorX<Scalar> dynamics_ratio(const MatrixX<Scalar>& s, const MatrixX<Scalar>& a, const MatrixX<Scalar>& s2) const {
    return clip_ratio(log_raw_ratio(s, a, s2), clips);
  }

  static VectorX<Scalar> clip_ratio(const VectorX<Scalar>& log_raw, const ClipRanges& c = {}) {
    return log_raw.unaryExpr([&](Scalar v) {
      return static_cast<Scalar>(std::clamp(std::exp(static_cast<double>(v)), c.ratio_lo, c.ratio_hi));
    });
  }
};

/// `steps` Adam steps on both discriminators, each on balanced minibatches
/// drawn with replacement from the two sources.
template <typename Scalar>
DiscriminatorLosses train_discriminators(DiscriminatorPair<Scalar>& pair, const core::Batch<Scalar>& offline,
                                         const core::Batch<Scalar>& model, int steps, Rng& rng) {
  if (offline.size() == 0 || model.size() == 0) throw Error(ErrorCode::Argument, "discriminator batches must be nonempty");
  std::uniform_int_distribution<Index> po(0, offline.size() - 1), pm(0, model.size() - 1);
  const Index n = pair.batch_size;
  const Index s_dim = offline.states.rows(), a_dim = offline.actions.rows();
  MatrixX<Scalar> xo(2 * s_dim + a_dim, n), xm(2 * s_dim + a_dim, n);
  DiscriminatorLosses last;
  for (int k = 0; k < steps; ++k) {
    for (Index j = 0; j < n; ++j) {
      const Index i = po(rng), m = pm(rng);
      xo.col(j) << offline.states.col(i), offline.actions.col(i), offline.next_states.col(i);
      xm.col(j) << model.states.col(m), model.actions.col(m), model.next_states.col(m);
    }
    last.sas = pair.sas.train_step(xo, xm);
    last.sa = pair.sa.train_step(xo.topRows(s_dim + a_dim), xm.topRows(s_dim + a_dim));
  }
  return last;
}

}  // namespace midl::ratio
