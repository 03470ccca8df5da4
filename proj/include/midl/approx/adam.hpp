#pragma once

#include "midl/approx/mlp.hpp"

#include <cmath>

namespace midl::approx {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam update on any Eigen expression-compatible container.
/// `step` is the 1-based step count after increment.
template <typename Derived, typename Moment>
void adam_update(Eigen::MatrixBase<Derived>& param, const Moment& grad, Moment& m1, Moment& m2,
                 long step, const AdamConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  const Scalar b1 = static_cast<Scalar>(cfg.beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.beta2);
  m1 = b1 * m1 + (Scalar(1) - b1) * grad;
  m2 = b2 * m2 + (Scalar(1) - b2) * grad.cwiseProduct(grad);
  const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(cfg.beta1, static_cast<double>(step)));
  const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(cfg.beta2, static_cast<double>(step)));
  const Scalar lr = static_cast<Scalar>(cfg.learning_rate);
  const Scalar eps = static_cast<Scalar>(cfg.epsilon);
  param.derived().array() -=
      lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
}

/// First/second moment accumulators shaped like the network they optimise.
template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  Adam(const Mlp<Scalar>& net, AdamConfig cfg)
      : cfg_(cfg), m1_(net.zero_gradients()), m2_(net.zero_gradients()) {}

  void step(Mlp<Scalar>& net, const Gradients<Scalar>& grads) {
    if (grads.layers.size() != net.layers().size() || m1_.layers.size() != net.layers().size()) {
      throw Error(ErrorCode::Shape, "Adam: gradient/parameter layer count mismatch");
    }
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      auto& layer = net.layers()[l];
      const auto& g = grads.layers[l];
      if (g.weight.rows() != layer.weight.rows() || g.weight.cols() != layer.weight.cols() ||
          g.bias.size() != layer.bias.size()) {
        throw Error(ErrorCode::Shape, "Adam: gradient shape mismatch in layer " + std::to_string(l));
      }
    }
    ++steps_;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      auto& layer = net.layers()[l];
      adam_update(layer.weight, grads.layers[l].weight, m1_.layers[l].weight, m2_.layers[l].weight,
                  steps_, cfg_);
      adam_update(layer.bias, grads.layers[l].bias, m1_.layers[l].bias, m2_.layers[l].bias, steps_,
                  cfg_);
    }
  }

  long steps() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }
  AdamConfig& config() { return cfg_; }

 private:
  AdamConfig cfg_;
  Gradients<Scalar> m1_, m2_;
  long steps_ = 0;
};

/// Adam on a single trainable scalar (used for the log entropy coefficient).
class ScalarAdam {
 public:
  explicit ScalarAdam(AdamConfig cfg = {}) : cfg_(cfg) {}

  double step(double param, double grad) {
    ++steps_;
    m1_ = cfg_.beta1 * m1_ + (1 - cfg_.beta1) * grad;
    m2_ = cfg_.beta2 * m2_ + (1 - cfg_.beta2) * grad * grad;
    const double c1 = 1 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double c2 = 1 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    return param - cfg_.learning_rate * (m1_ / c1) / (std::sqrt(m2_ / c2) + cfg_.epsilon);
  }

  long steps() const { return steps_; }

 private:
  AdamConfig cfg_;
  double m1_ = 0, m2_ = 0;
  long steps_ = 0;
};

}  // namespace midl::approx
