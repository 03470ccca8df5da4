#pragma once

#include "midl/common.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace midl::approx {

/// Bounds on log standard deviation. The clamp is a softplus squash followed
/// by a hard clip that only removes the ~1e-3 softplus overshoot at the ends.
struct LogStdClamp {
  double lo = -5.0;
  double hi = 2.0;
};

template <typename Scalar>
struct GaussianHead {
  MatrixX<Scalar> mean;     // d x B
  MatrixX<Scalar> log_std;  // d x B, clamped
  MatrixX<Scalar> raw;      // unclamped log-std input, kept for backward

  MatrixX<Scalar> std_dev() const { return log_std.array().exp().matrix(); }
};

namespace detail {
template <typename Scalar>
Scalar softplus(Scalar x) {
  return x > Scalar(20) ? x : std::log1p(std::exp(x));
}
template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}
}  // namespace detail

template <typename Scalar>
Scalar soft_clamp(Scalar x, const LogStdClamp& c) {
  const Scalar hi = static_cast<Scalar>(c.hi), lo = static_cast<Scalar>(c.lo);
  const Scalar upper = hi - detail::softplus(hi - x);
  return std::clamp(lo + detail::softplus(upper - lo), lo, hi);
}

template <typename Scalar>
Scalar soft_clamp_derivative(Scalar x, const LogStdClamp& c) {
  const Scalar hi = static_cast<Scalar>(c.hi), lo = static_cast<Scalar>(c.lo);
  const Scalar upper = hi - detail::softplus(hi - x);
  const Scalar y = lo + detail::softplus(upper - lo);
  if (y <= lo || y >= hi) return Scalar(0);
  return detail::sigmoid(hi - x) * detail::sigmoid(upper - lo);
}

/// Splits a raw network output with 2d rows into (mean, log-std).
template <typename Scalar>
GaussianHead<Scalar> split_gaussian(const MatrixX<Scalar>& raw, const LogStdClamp& clamp) {
  if (raw.rows() % 2 != 0) throw Error(ErrorCode::Shape, "gaussian head needs an even number of outputs");
  const Index d = raw.rows() / 2;
  GaussianHead<Scalar> head;
  head.mean = raw.topRows(d);
  head.raw = raw.bottomRows(d);
  head.log_std = head.raw.unaryExpr([&](Scalar v) { return soft_clamp(v, clamp); });
  return head;
}

/// Maps gradients w.r.t. (mean, clamped log-std) back to the raw 2d output.
template <typename Scalar>
MatrixX<Scalar> gaussian_head_backward(const GaussianHead<Scalar>& head, const MatrixX<Scalar>& d_mean,
                                       const MatrixX<Scalar>& d_log_std, const LogStdClamp& clamp) {
  const Index d = head.mean.rows();
  MatrixX<Scalar> out(2 * d, head.mean.cols());
  out.topRows(d) = d_mean;
  out.bottomRows(d) =
      d_log_std.cwiseProduct(head.raw.unaryExpr([&](Scalar v) { return soft_clamp_derivative(v, clamp); }));
  return out;
}

/// Mean over the batch of the per-sample diagonal-Gaussian negative
/// log-likelihood (summed over dimensions). Optionally writes gradients of that
/// mean w.r.t. mean and log-std.
template <typename Scalar>
Scalar gaussian_nll(const GaussianHead<Scalar>& head, const MatrixX<Scalar>& target,
                    MatrixX<Scalar>* d_mean = nullptr, MatrixX<Scalar>* d_log_std = nullptr) {
  if (target.rows() != head.mean.rows() || target.cols() != head.mean.cols()) {
    throw Error(ErrorCode::Shape, "gaussian_nll: target shape mismatch");
  }
  const Scalar half_log_2pi = Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
  const auto inv_std = (-head.log_std.array()).exp();
  const auto z = (target.array() - head.mean.array()) * inv_std;
  const Scalar batch = static_cast<Scalar>(head.mean.cols());
  const Scalar total = (Scalar(0.5) * z.square() + head.log_std.array() + half_log_2pi).sum();
  if (d_mean) *d_mean = (-(z * inv_std) / batch).matrix();
  if (d_log_std) *d_log_std = ((Scalar(1) - z.square()) / batch).matrix();
  return total / batch;
}

/// Per-sample NLL (summed over dimensions), one entry per column.
template <typename Scalar>
VectorX<Scalar> gaussian_nll_per_sample(const MatrixX<Scalar>& mean, const MatrixX<Scalar>& log_std,
                                        const MatrixX<Scalar>& target) {
  const Scalar half_log_2pi = Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
  const auto z = (target.array() - mean.array()) * (-log_std.array()).exp();
  return (Scalar(0.5) * z.square() + log_std.array() + half_log_2pi).colwise().sum().transpose().matrix();
}

}  // namespace midl::approx
