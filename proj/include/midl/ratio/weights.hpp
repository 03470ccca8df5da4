#pragma once

#include "midl/model/rollout.hpp"
#include "midl/ratio/discriminator.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace midl::ratio {

enum class GMode {
  /// mean over sampled s' of -log(clipped dynamics ratio)
  ReverseKl,
  /// mean over sampled s' of the clipped dynamics ratio
  Literal,
  /// mean over sampled s' of log(raw dynamics ratio), a Monte-Carlo KL(model || data)
  ModelKl,
};

const char* g_mode_name(GMode mode);
GMode g_mode_from_name(const std::string& name);

/// Reduces per-sample ratio statistics to g according to `mode`, clipped to
/// [g_lo, g_hi] (default [1e-45, 10]).
template <typename Scalar>
Scalar g_from_log_ratios(const Eigen::Ref<const VectorX<Scalar>>& log_raw, GMode mode, const ClipRanges& c = {}) {
  if (log_raw.size() < 1) throw Error(ErrorCode::Argument, "g needs at least one sampled next state");
  double acc = 0;
  for (Index k = 0; k < log_raw.size(); ++k) {
    const double lr = static_cast<double>(log_raw(k));
    const double clipped = std::clamp(std::exp(lr), c.ratio_lo, c.ratio_hi);
    switch (mode) {
      case GMode::ReverseKl: acc += -std::log(clipped); break;
      case GMode::Literal: acc += clipped; break;
      case GMode::ModelKl: acc += lr; break;
    }
  }
  return static_cast<Scalar>(std::clamp(acc / static_cast<double>(log_raw.size()), c.g_lo, c.g_hi));
}

/// g(s,a) per column from precomputed next-state draws; `probes` is
/// (m * state_dim) x B as produced by model::sample_probes.
template <typename Scalar>
VectorX<Scalar> g_from_probes(const DiscriminatorPair<Scalar>& pair, const MatrixX<Scalar>& s, const MatrixX<Scalar>& a,
                              const MatrixX<Scalar>& probes, GMode mode) {
  const Index s_dim = s.rows(), n = s.cols();
  if (s_dim == 0 || probes.rows() == 0 || probes.rows() % s_dim != 0 || probes.cols() != n) {
    throw Error(ErrorCode::Shape, "probe matrix must stack m next states per column");
  }
  const Index m = probes.rows() / s_dim;
  MatrixX<Scalar> log_raw(m, n);
  for (Index k = 0; k < m; ++k) log_raw.row(k) = pair.log_raw_ratio(s, a, probes.middleRows(k * s_dim, s_dim)).transpose();
  VectorX<Scalar> g(n);
  for (Index j = 0; j < n; ++j) g(j) = g_from_log_ratios<Scalar>(log_raw.col(j), mode, pair.clips);
  return g;
}

/// g(s,a) per column: draws m next states from the ensemble at each (s, a)
/// and reduces the dynamics ratios of those samples.
template <typename Scalar>
VectorX<Scalar> g_estimate(const DiscriminatorPair<Scalar>& pair, const model::GaussianEnsemble<Scalar>& ens,
                           const MatrixX<Scalar>& s, const MatrixX<Scalar>& a, int m, GMode mode, Rng& rng) {
  if (m < 1) throw Error(ErrorCode::Argument, "g needs m >= 1 sampled next states");
  const auto pred = ens.predict(s, a, rng);
  return g_from_probes(pair, s, a, model::sample_probes(pred, m, rng), mode);
}

template <typename Scalar>
struct SamplingWeights {
  VectorX<Scalar> g;
  VectorX<Scalar> omega;
  Scalar normalizer = 0;  // sum of g
  bool uniform_fallback = false;

  /// Shannon entropy of omega (nats).
  double entropy() const {
    double h = 0;
    for (Index i = 0; i < omega.size(); ++i)
      if (omega(i) > 0) h -= static_cast<double>(omega(i)) * std::log(static_cast<double>(omega(i)));
    return h;
  }
};

/// omega_i = g_i / sum_j g_j over the batch; uniform when every g sits at the floor.
template <typename Scalar>
SamplingWeights<Scalar> normalize_weights(VectorX<Scalar> g, double g_floor = kGFloor) {
  if (g.size() == 0) throw Error(ErrorCode::Argument, "sampling weights need a nonempty batch");
  SamplingWeights<Scalar> w;
  const bool all_floor = (g.array() <= static_cast<Scalar>(g_floor)).all();
  w.normalizer = g.sum();
  if (all_floor || !(w.normalizer > Scalar(0))) {
    w.omega = VectorX<Scalar>::Constant(g.size(), Scalar(1) / static_cast<Scalar>(g.size()));
    w.uniform_fallback = true;
  } else {
    w.omega = g / w.normalizer;
  }
  w.g = std::move(g);
  return w;
}

template <typename Scalar>
SamplingWeights<Scalar> sampling_weights(const DiscriminatorPair<Scalar>& pair, const model::GaussianEnsemble<Scalar>& ens,
                                         const MatrixX<Scalar>& s, const MatrixX<Scalar>& a, int m, GMode mode,
                                         Rng& rng) {
  return normalize_weights<Scalar>(g_estimate(pair, ens, s, a, m, mode, rng), pair.clips.g_lo);
}

/// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation (Pearson correlation of average ranks).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::Argument, "spearman needs two equal-length samples");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace midl::ratio
