#pragma once

#include "midl/approx/adam.hpp"
#include "midl/approx/gaussian.hpp"

#include <cmath>
#include <numbers>

namespace midl::agent {

struct ActionBox {
  double lo = -1.0;
  double hi = 1.0;

  double center() const { return 0.5 * (lo + hi); }
  double half_width() const { return 0.5 * (hi - lo); }
  /// log of the box volume in `dim` dimensions.
  double log_volume(Index dim) const { return static_cast<double>(dim) * std::log(hi - lo); }
};

/// Reparameterised draw from the actor. `eps` is the standard-normal noise;
/// everything else is a deterministic function of (states, eps).
template <typename Scalar>
struct ActorSample {
  MatrixX<Scalar> actions;   // a_dim x B, inside the box
  VectorX<Scalar> log_prob;  // B
  MatrixX<Scalar> eps;       // a_dim x B
  MatrixX<Scalar> pre_tanh;  // a_dim x B
  approx::GaussianHead<Scalar> head;
  approx::ForwardCache<Scalar> cache;
};

/// log(1 - tanh(u)^2), computed without cancellation.
template <typename Scalar>
Scalar log_one_minus_tanh_sq(Scalar u) {
  return Scalar(2) * (static_cast<Scalar>(std::numbers::ln2) - u - approx::detail::softplus(Scalar(-2) * u));
}

/// Diagonal Gaussian over pre-squash actions, squashed by tanh into the box.
template <typename Scalar>
class Actor {
 public:
  using MatrixType = MatrixX<Scalar>;

  Actor() = default;
  Actor(int state_dim, int action_dim, int hidden, int hidden_layers, ActionBox box, approx::LogStdClamp clamp,
        double learning_rate, Rng& rng)
      : box_(box), clamp_(clamp) {
    std::vector<int> sizes{state_dim};
    for (int l = 0; l < hidden_layers; ++l) sizes.push_back(hidden);
    sizes.push_back(2 * action_dim);
    net_ = approx::Mlp<Scalar>(sizes, approx::Activation::Relu, approx::Activation::Linear, rng);
    opt_ = approx::Adam<Scalar>(net_, {learning_rate});
  }

  /// Rebuilds an actor around existing weights with a fresh optimizer.
  static Actor from_parts(approx::Mlp<Scalar> net, ActionBox box, approx::LogStdClamp clamp, double learning_rate) {
    if (net.output_dim() % 2 != 0) throw Error(ErrorCode::Shape, "actor output must hold a mean and a log-std per action");
    Actor a;
    a.box_ = box;
    a.clamp_ = clamp;
    a.net_ = std::move(net);
    a.opt_ = approx::Adam<Scalar>(a.net_, {learning_rate});
    return a;
  }

  int state_dim() const { return net_.input_dim(); }
  int action_dim() const { return net_.output_dim() / 2; }
  const ActionBox& box() const { return box_; }
  const approx::LogStdClamp& clamp() const { return clamp_; }
  approx::Mlp<Scalar>& net() { return net_; }
  const approx::Mlp<Scalar>& net() const { return net_; }
  approx::Adam<Scalar>& optimizer() { return opt_; }

  ActorSample<Scalar> sample(const MatrixType& s, Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixType eps(action_dim(), s.cols());
    for (Index i = 0; i < eps.size(); ++i) eps.data()[i] = static_cast<Scalar>(normal(rng));
    return evaluate(s, std::move(eps));
  }

  ActorSample<Scalar> evaluate(const MatrixType& s, MatrixType eps) const {
    ActorSample<Scalar> out;
    out.head = approx::split_gaussian<Scalar>(net_.forward(s, out.cache), clamp_);
    if (eps.rows() != out.head.mean.rows() || eps.cols() != s.cols()) throw Error(ErrorCode::Shape, "actor noise shape mismatch");
    const MatrixType std_dev = out.head.std_dev();
    out.pre_tanh = out.head.mean + std_dev.cwiseProduct(eps);
    const Scalar c = static_cast<Scalar>(box_.center()), h = static_cast<Scalar>(box_.half_width());
    out.actions = (c + h * out.pre_tanh.array().tanh()).matrix();
    const Scalar half_log_2pi = Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
    const Scalar log_h = std::log(h);
    out.log_prob.resize(s.cols());
    for (Index j = 0; j < s.cols(); ++j) {
      Scalar lp = 0;
      for (Index d = 0; d < eps.rows(); ++d) {
        lp += -Scalar(0.5) * eps(d, j) * eps(d, j) - out.head.log_std(d, j) - half_log_2pi - log_h -
              log_one_minus_tanh_sq(out.pre_tanh(d, j));
      }
      out.log_prob(j) = lp;
    }
    out.eps = std::move(eps);
    return out;
  }

  /// Deterministic action: the squashed Gaussian mean.
  MatrixType mean_action(const MatrixType& s) const {
    const auto head = approx::split_gaussian<Scalar>(net_.forward(s), clamp_);
    return (static_cast<Scalar>(box_.center()) + static_cast<Scalar>(box_.half_width()) * head.mean.array().tanh()).matrix();
  }

  /// Accumulates parameter gradients of a loss L(actions, log_prob) with the
  /// noise held fixed.
  void backward(const ActorSample<Scalar>& smp, const MatrixType& d_actions, const VectorX<Scalar>& d_log_prob,
                approx::Gradients<Scalar>& grads) const {
    const Scalar h = static_cast<Scalar>(box_.half_width());
    const auto t = smp.pre_tanh.array().tanh();
    // d/du of log pi through the squash correction is 2 tanh(u).
    MatrixType du = (d_actions.array() * h * (Scalar(1) - t.square())).matrix();
    du.array() += (Scalar(2) * t).rowwise() * d_log_prob.transpose().array();
    const MatrixType d_mean = du;
    MatrixType d_log_std = du.cwiseProduct(smp.head.std_dev()).cwiseProduct(smp.eps);
    d_log_std.rowwise() -= d_log_prob.transpose();
    net_.backward(smp.cache, approx::gaussian_head_backward(smp.head, d_mean, d_log_std, clamp_), grads);
  }

  void apply(const approx::Gradients<Scalar>& grads) { opt_.step(net_, grads); }

 private:
  ActionBox box_;
  approx::LogStdClamp clamp_;
  approx::Mlp<Scalar> net_;
  approx::Adam<Scalar> opt_;
};

/// Trainable alpha = exp(log_alpha) with a dual step toward a target entropy.
class EntropyCoef {
 public:
  EntropyCoef() = default;
  EntropyCoef(double initial_alpha, double target_entropy, double learning_rate)
      : log_alpha_(std::log(initial_alpha)), target_(target_entropy), opt_({learning_rate}) {
    if (!(initial_alpha > 0)) throw Error(ErrorCode::Config, "initial alpha must be positive");
  }

  double alpha() const { return std::exp(log_alpha_); }
  double log_alpha() const { return log_alpha_; }
  void set_log_alpha(double v) { log_alpha_ = v; }
  double target_entropy() const { return target_; }

  /// d/d(log alpha) of -log_alpha * (mean log pi + target).
  double gradient(double mean_log_prob) const { return -(mean_log_prob + target_); }

  /// One Adam step; returns the loss value before the step.
  double update(double mean_log_prob) {
    require_finite(mean_log_prob, "policy log-probability");
    const double loss = -log_alpha_ * (mean_log_prob + target_);
    log_alpha_ = opt_.step(log_alpha_, gradient(mean_log_prob));
    return loss;
  }

 private:
  double log_alpha_ = 0;
  double target_ = -1;
  approx::ScalarAdam opt_;
};

}  // namespace midl::agent
