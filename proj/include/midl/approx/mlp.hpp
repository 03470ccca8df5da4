#pragma once

#include "midl/common.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace midl::approx {

enum class Activation { Linear, Relu, Tanh };

const char* activation_name(Activation act);
Activation activation_from_name(const std::string& name);

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weight;  // out x in
  VectorX<Scalar> bias;    // out
};

/// Parameter-shaped container used for gradients and optimizer moments.
template <typename Scalar>
struct Gradients {
  std::vector<DenseLayer<Scalar>> layers;

  void set_zero() {
    for (auto& l : layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
  }

  Gradients& operator+=(const Gradients& other) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].weight += other.layers[i].weight;
      layers[i].bias += other.layers[i].bias;
    }
    return *this;
  }

  Gradients& operator*=(Scalar s) {
    for (auto& l : layers) {
      l.weight *= s;
      l.bias *= s;
    }
    return *this;
  }

  Scalar squared_norm() const {
    Scalar acc = 0;
    for (const auto& l : layers) acc += l.weight.squaredNorm() + l.bias.squaredNorm();
    return acc;
  }
};

/// Activations recorded by a forward pass; consumed by backward().
template <typename Scalar>
struct ForwardCache {
  std::vector<MatrixX<Scalar>> inputs;  // input to each layer
  std::vector<MatrixX<Scalar>> outputs; // post-activation of each layer

  bool empty() const { return inputs.empty(); }
};

/// Fully connected feedforward network. Samples are columns: a batch is an
/// (input_dim x batch) matrix.
template <typename Scalar>
class Mlp {
 public:
  using MatrixType = MatrixX<Scalar>;
  using VectorType = VectorX<Scalar>;

  Mlp() = default;

  /// Uniform fan-in initialisation: weights and biases ~ U(-1/sqrt(in), 1/sqrt(in)).
  Mlp(std::vector<int> sizes, Activation hidden, Activation output, Rng& rng)
      : sizes_(std::move(sizes)), hidden_(hidden), output_(output) {
    check_sizes();
    layers_.resize(sizes_.size() - 1);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
      std::uniform_real_distribution<double> u(-bound, bound);
      auto& layer = layers_[l];
      layer.weight.resize(sizes_[l + 1], sizes_[l]);
      layer.bias.resize(sizes_[l + 1]);
      for (Index j = 0; j < layer.weight.cols(); ++j)
        for (Index i = 0; i < layer.weight.rows(); ++i)
          layer.weight(i, j) = static_cast<Scalar>(u(rng));
      for (Index i = 0; i < layer.bias.size(); ++i)
        layer.bias(i) = static_cast<Scalar>(u(rng));
    }
  }

  static Mlp zeros(std::vector<int> sizes, Activation hidden, Activation output) {
    Mlp net;
    net.sizes_ = std::move(sizes);
    net.hidden_ = hidden;
    net.output_ = output;
    net.check_sizes();
    net.layers_.resize(net.sizes_.size() - 1);
    for (std::size_t l = 0; l + 1 < net.sizes_.size(); ++l) {
      net.layers_[l].weight = MatrixType::Zero(net.sizes_[l + 1], net.sizes_[l]);
      net.layers_[l].bias = VectorType::Zero(net.sizes_[l + 1]);
    }
    return net;
  }

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  std::size_t num_layers() const { return layers_.size(); }
  const std::vector<int>& sizes() const { return sizes_; }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }
  Activation activation_of(std::size_t layer) const {
    return layer + 1 == layers_.size() ? output_ : hidden_;
  }

  std::vector<DenseLayer<Scalar>>& layers() { return layers_; }
  const std::vector<DenseLayer<Scalar>>& layers() const { return layers_; }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  MatrixType forward(const MatrixType& x) const {
    check_input(x);
    MatrixType a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      MatrixType z = layers_[l].weight * a;
      z.colwise() += layers_[l].bias;
      apply(activation_of(l), z);
      a = std::move(z);
    }
    return a;
  }

  MatrixType forward(const MatrixType& x, ForwardCache<Scalar>& cache) const {
    check_input(x);
    cache.inputs.resize(layers_.size());
    cache.outputs.resize(layers_.size());
    const MatrixType* a = &x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      cache.inputs[l] = *a;
      MatrixType& z = cache.outputs[l];
      z.noalias() = layers_[l].weight * (*a);
      z.colwise() += layers_[l].bias;
      apply(activation_of(l), z);
      a = &z;
    }
    return cache.outputs.back();
  }

  /// Accumulates parameter gradients of a loss into `grads` given dLoss/dOutput,
  /// and returns dLoss/dInput.
  MatrixType backward(const ForwardCache<Scalar>& cache, const MatrixType& upstream,
                      Gradients<Scalar>& grads) const {
    if (cache.empty() || cache.inputs.size() != layers_.size()) {
      throw Error(ErrorCode::State, "backward called without a forward cache");
    }
    if (upstream.rows() != output_dim() || upstream.cols() != cache.outputs.back().cols()) {
      throw Error(ErrorCode::Shape, "upstream gradient shape mismatch");
    }
    if (grads.layers.size() != layers_.size()) grads = zero_gradients();
    MatrixType delta = upstream;
    for (std::size_t k = layers_.size(); k-- > 0;) {
      apply_derivative(activation_of(k), cache.outputs[k], delta);
      grads.layers[k].weight.noalias() += delta * cache.inputs[k].transpose();
      grads.layers[k].bias += delta.rowwise().sum();
      MatrixType next = layers_[k].weight.transpose() * delta;
      delta = std::move(next);
    }
    return delta;
  }

  /// dLoss/dInput only; skips the weight-gradient products.
  MatrixType input_gradient(const ForwardCache<Scalar>& cache, const MatrixType& upstream) const {
    if (cache.empty()) throw Error(ErrorCode::State, "backward called without a forward cache");
    MatrixType delta = upstream;
    for (std::size_t k = layers_.size(); k-- > 0;) {
      apply_derivative(activation_of(k), cache.outputs[k], delta);
      MatrixType next = layers_[k].weight.transpose() * delta;
      delta = std::move(next);
    }
    return delta;
  }

  Gradients<Scalar> zero_gradients() const {
    Gradients<Scalar> g;
    g.layers.resize(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      g.layers[l].weight = MatrixType::Zero(layers_[l].weight.rows(), layers_[l].weight.cols());
      g.layers[l].bias = VectorType::Zero(layers_[l].bias.size());
    }
    return g;
  }

  /// target <- tau * source + (1 - tau) * target, elementwise.
  void soft_update_from(const Mlp& source, Scalar tau) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      layers_[l].weight = tau * source.layers_[l].weight + (Scalar(1) - tau) * layers_[l].weight;
      layers_[l].bias = tau * source.layers_[l].bias + (Scalar(1) - tau) * layers_[l].bias;
    }
  }

  template <typename Other>
  Mlp<Other> cast() const {
    auto out = Mlp<Other>::zeros(sizes_, hidden_, output_);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      out.layers()[l].weight = layers_[l].weight.template cast<Other>();
      out.layers()[l].bias = layers_[l].bias.template cast<Other>();
    }
    return out;
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

 private:
  void check_sizes() const {
    if (sizes_.size() < 2) throw Error(ErrorCode::Shape, "network needs at least input and output sizes");
    for (int s : sizes_)
      if (s <= 0) throw Error(ErrorCode::Shape, "layer sizes must be positive");
  }

  void check_input(const MatrixType& x) const {
    if (x.rows() != input_dim()) {
      throw Error(ErrorCode::Shape, "input has " + std::to_string(x.rows()) + " rows, network expects " +
                                        std::to_string(input_dim()));
    }
  }

  static void apply(Activation act, MatrixType& z) {
    switch (act) {
      case Activation::Linear: break;
      case Activation::Relu: z = z.cwiseMax(Scalar(0)); break;
      case Activation::Tanh: z = z.array().tanh().matrix(); break;
    }
  }

  // `y` is the post-activation output; scales `delta` in place.
  static void apply_derivative(Activation act, const MatrixType& y, MatrixType& delta) {
    switch (act) {
      case Activation::Linear: break;
      case Activation::Relu: delta = (y.array() > Scalar(0)).select(delta, Scalar(0)); break;
      case Activation::Tanh: delta.array() *= (Scalar(1) - y.array().square()); break;
    }
  }

  std::vector<int> sizes_;
  Activation hidden_ = Activation::Relu;
  Activation output_ = Activation::Linear;
  std::vector<DenseLayer<Scalar>> layers_;
};

}  // namespace midl::approx
