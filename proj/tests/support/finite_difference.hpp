#pragma once

#include "midl/approx/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace midl::testing {

struct FdResult {
  double max_rel_error = 0;
  int probes = 0;
  int kink_redraws = 0;  // probes whose FD stencil straddled a ReLU kink
};

/// Central finite differences (h = 1e-5) on `probes` random parameters of
/// `net`, compared with `analytic`. `loss` must read the current parameters of
/// `net`. Relative error is |n - a| / max(|n| + |a|, 1e-7). A parameter whose
/// h and h/2 stencils disagree by more than `kink_tol` (relative) has a ReLU
/// kink inside the stencil and is redrawn. Keep `kink_tol` below the accuracy
/// being tested, or kinks show up as gradient errors.
inline FdResult check_gradients(approx::Mlp<double>& net, const approx::Gradients<double>& analytic,
                                const std::function<double()>& loss, int probes, Rng& rng, double h = 1e-5,
                                double kink_tol = 1e-5) {
  FdResult out;
  std::uniform_int_distribution<std::size_t> pick_layer(0, net.num_layers() - 1);
  auto central = [&](double* p, double step) {
    const double saved = *p;
    *p = saved + step;
    const double up = loss();
    *p = saved - step;
    const double down = loss();
    *p = saved;
    return (up - down) / (2 * step);
  };
  while (out.probes < probes) {
    const std::size_t l = pick_layer(rng);
    auto& layer = net.layers()[l];
    const bool bias = std::uniform_int_distribution<int>(0, 3)(rng) == 0;
    double* p;
    double a;
    if (bias) {
      const Index i = std::uniform_int_distribution<Index>(0, layer.bias.size() - 1)(rng);
      p = &layer.bias(i);
      a = analytic.layers[l].bias(i);
    } else {
      const Index i = std::uniform_int_distribution<Index>(0, layer.weight.size() - 1)(rng);
      p = layer.weight.data() + i;
      a = analytic.layers[l].weight.data()[i];
    }
    const double n = central(p, h);
    const double n2 = central(p, h / 2);
    if (std::abs(n - n2) > kink_tol * std::max(std::abs(n) + std::abs(n2), 1e-7)) {
      if (++out.kink_redraws > 10 * probes) break;
      continue;
    }
    out.max_rel_error = std::max(out.max_rel_error, std::abs(n - a) / std::max(std::abs(n) + std::abs(a), 1e-7));
    ++out.probes;
  }
  return out;
}

}  // namespace midl::testing
