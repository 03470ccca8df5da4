#pragma once

#include "midl/approx/adam.hpp"

#include <array>
#include <utility>

namespace midl::agent {

/// Twin Q networks over stacked (s; a) with soft-target copies.
template <typename Scalar>
struct CriticPair {
  std::array<approx::Mlp<Scalar>, 2> q;
  std::array<approx::Mlp<Scalar>, 2> target;
  std::array<approx::Adam<Scalar>, 2> opt;
  double tau = 5e-3;

  CriticPair() = default;
  CriticPair(int state_dim, int action_dim, int hidden, int hidden_layers, double learning_rate, double tau_, Rng& rng)
      : tau(tau_) {
    if (!(tau > 0 && tau < 1)) throw Error(ErrorCode::Config, "tau must lie in (0, 1)");
    std::vector<int> sizes{state_dim + action_dim};
    for (int l = 0; l < hidden_layers; ++l) sizes.push_back(hidden);
    sizes.push_back(1);
    for (int k = 0; k < 2; ++k) {
      q[k] = approx::Mlp<Scalar>(sizes, approx::Activation::Relu, approx::Activation::Linear, rng);
      target[k] = q[k];
      opt[k] = approx::Adam<Scalar>(q[k], {learning_rate});
    }
  }

  int input_dim() const { return q[0].input_dim(); }

  /// Exchanges the roles of the two critics, including optimizer state.
  void swap_members() {
    std::swap(q[0], q[1]);
    std::swap(target[0], target[1]);
    std::swap(opt[0], opt[1]);
  }
};

template <typename Scalar>
MatrixX<Scalar> stack_inputs(const MatrixX<Scalar>& s, const MatrixX<Scalar>& a) {
  if (s.cols() != a.cols()) throw Error(ErrorCode::Shape, "state/action batch sizes differ");
  MatrixX<Scalar> x(s.rows() + a.rows(), s.cols());
  x << s, a;
  return x;
}

/// Q(s, a) as a vector.
template <typename Scalar>
VectorX<Scalar> q_values(const approx::Mlp<Scalar>& net, const MatrixX<Scalar>& s, const MatrixX<Scalar>& a) {
  return net.forward(stack_inputs(s, a)).row(0).transpose();
}

/// target <- tau * live + (1 - tau) * target for both critics.
template <typename Scalar>
void soft_update(CriticPair<Scalar>& c, double tau) {
  if (!(tau >= 0 && tau <= 1)) throw Error(ErrorCode::Argument, "soft update rate must lie in [0, 1]");
  for (int k = 0; k < 2; ++k) c.target[k].soft_update_from(c.q[k], static_cast<Scalar>(tau));
}

}  // namespace midl::agent
