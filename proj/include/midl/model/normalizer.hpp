#pragma once

#include "midl/common.hpp"

#include <cmath>

namespace midl::model {

/// Per-row affine standardisation of column-sample batches.
template <typename Scalar>
struct Normalizer {
  VectorX<Scalar> mean;
  VectorX<Scalar> scale;  // std, floored so constant features stay finite

  static Normalizer identity(Index dim) {
    return {VectorX<Scalar>::Zero(dim), VectorX<Scalar>::Ones(dim)};
  }

  static Normalizer fit(const MatrixX<Scalar>& x, Scalar min_scale = Scalar(1e-6)) {
    if (x.cols() == 0) throw Error(ErrorCode::Argument, "cannot fit a normalizer to zero samples");
    Normalizer n;
    n.mean = x.rowwise().mean();
    const MatrixX<Scalar> centered = x.colwise() - n.mean;
    n.scale = (centered.array().square().rowwise().sum() / static_cast<Scalar>(x.cols())).sqrt().matrix();
    n.scale = n.scale.cwiseMax(min_scale);
    return n;
  }

  Index dim() const { return mean.size(); }

  template <typename Other>
  Normalizer<Other> cast() const {
    return {mean.template cast<Other>(), scale.template cast<Other>()};
  }

  MatrixX<Scalar> normalize(const MatrixX<Scalar>& x) const {
    if (x.rows() != dim()) throw Error(ErrorCode::Shape, "normalizer dimension mismatch");
    return ((x.colwise() - mean).array().colwise() / scale.array()).matrix();
  }

  MatrixX<Scalar> denormalize(const MatrixX<Scalar>& z) const {
    if (z.rows() != dim()) throw Error(ErrorCode::Shape, "normalizer dimension mismatch");
    return ((z.array().colwise() * scale.array()).matrix()).colwise() + mean;
  }
};

/// KL(N(m1, s1^2) || N(m2, s2^2)) for scalars.
template <typename Scalar>
Scalar gaussian_kl(Scalar m1, Scalar s1, Scalar m2, Scalar s2) {
  const Scalar d = m1 - m2;
  return std::log(s2 / s1) + (s1 * s1 + d * d) / (Scalar(2) * s2 * s2) - Scalar(0.5);
}

}  // namespace midl::model
