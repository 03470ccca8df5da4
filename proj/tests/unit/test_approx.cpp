#include "midl/approx/adam.hpp"
#include "midl/approx/checkpoint.hpp"
#include "midl/approx/gaussian.hpp"
#include "midl/approx/mlp.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace midl;
using namespace midl::approx;

namespace {

// Loss L = sum(C .* net(X)) for a fixed random C; dL/dOut = C.
double probe_loss(const Mlp<double>& net, const Matrix& x, const Matrix& c) {
  return net.forward(x).cwiseProduct(c).sum();
}

double max_rel_error(const Mlp<double>& net, const Matrix& x, const Matrix& c, int probes, Rng& rng) {
  ForwardCache<double> cache;
  net.forward(x, cache);
  Gradients<double> g = net.zero_gradients();
  net.backward(cache, c, g);
  Mlp<double> work = net;
  std::uniform_int_distribution<std::size_t> pick_layer(0, net.num_layers() - 1);
  const double h = 1e-5;
  double worst = 0;
  for (int p = 0; p < probes; ++p) {
    const std::size_t l = pick_layer(rng);
    const bool bias = std::uniform_int_distribution<int>(0, 3)(rng) == 0;
    auto& layer = work.layers()[l];
    double* param;
    double analytic;
    if (bias) {
      const Index i = std::uniform_int_distribution<Index>(0, layer.bias.size() - 1)(rng);
      param = &layer.bias(i);
      analytic = g.layers[l].bias(i);
    } else {
      const Index i = std::uniform_int_distribution<Index>(0, layer.weight.size() - 1)(rng);
      param = layer.weight.data() + i;
      analytic = g.layers[l].weight.data()[i];
    }
    const double saved = *param;
    *param = saved + h;
    const double up = probe_loss(work, x, c);
    *param = saved - h;
    const double down = probe_loss(work, x, c);
    *param = saved;
    const double numeric = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(numeric - analytic) / std::max(1.0, std::abs(numeric) + std::abs(analytic)));
  }
  return worst;
}

}  // namespace

TEST(Mlp, ZeroWeightsReturnBias) {
  auto net = Mlp<double>::zeros({3, 2}, Activation::Relu, Activation::Linear);
  net.layers()[0].bias << 0.25, -1.5;
  const Matrix y = net.forward(Matrix::Random(3, 4));
  for (Index j = 0; j < 4; ++j) {
    EXPECT_EQ(y(0, j), 0.25);
    EXPECT_EQ(y(1, j), -1.5);
  }
}

TEST(Mlp, IdentityLinearLayer) {
  auto net = Mlp<double>::zeros({3, 3}, Activation::Relu, Activation::Linear);
  net.layers()[0].weight.setIdentity();
  const Matrix x = Matrix::Random(3, 5);
  EXPECT_EQ(net.forward(x), x);
}

TEST(Mlp, SeededInitIsReproducible) {
  Rng a(7), b(7);
  Mlp<double> n1({4, 16, 2}, Activation::Relu, Activation::Linear, a);
  Mlp<double> n2({4, 16, 2}, Activation::Relu, Activation::Linear, b);
  const Matrix x = Matrix::Random(4, 3);
  EXPECT_EQ(n1.forward(x), n2.forward(x));
}

TEST(Mlp, InputDimensionMismatchThrows) {
  Rng rng(1);
  Mlp<double> net({4, 8, 2}, Activation::Relu, Activation::Linear, rng);
  EXPECT_THROW(net.forward(Matrix::Zero(3, 1)), Error);
}

TEST(Mlp, QuadraticLossHandGradient) {
  // L = (w x - y)^2, dL/dw = 2 x (w x - y) = 24 at x=2, y=0, w=3.
  auto net = Mlp<double>::zeros({1, 1}, Activation::Relu, Activation::Linear);
  net.layers()[0].weight(0, 0) = 3.0;
  ForwardCache<double> cache;
  const Matrix x = Matrix::Constant(1, 1, 2.0);
  const Matrix out = net.forward(x, cache);
  const Matrix upstream = 2.0 * (out.array() - 0.0).matrix();
  auto g = net.zero_gradients();
  net.backward(cache, upstream, g);
  EXPECT_DOUBLE_EQ(g.layers[0].weight(0, 0), 24.0);
}

TEST(Mlp, ConstantLossGivesZeroGradient) {
  Rng rng(3);
  Mlp<double> net({2, 8, 1}, Activation::Relu, Activation::Linear, rng);
  ForwardCache<double> cache;
  net.forward(Matrix::Random(2, 4), cache);
  auto g = net.zero_gradients();
  net.backward(cache, Matrix::Zero(1, 4), g);
  EXPECT_EQ(g.squared_norm(), 0.0);
}

TEST(Mlp, BackwardWithoutCacheThrows) {
  Rng rng(3);
  Mlp<double> net({2, 8, 1}, Activation::Relu, Activation::Linear, rng);
  ForwardCache<double> cache;
  auto g = net.zero_gradients();
  try {
    net.backward(cache, Matrix::Zero(1, 1), g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::State);
  }
}

TEST(Mlp, FiniteDifferenceAllActivations) {
  Rng rng(11);
  for (Activation hidden : {Activation::Relu, Activation::Tanh}) {
    for (Activation output : {Activation::Linear, Activation::Tanh}) {
      Mlp<double> net({3, 12, 9, 2}, hidden, output, rng);
      const Matrix x = Matrix::Random(3, 6);
      const Matrix c = Matrix::Random(2, 6);
      EXPECT_LT(max_rel_error(net, x, c, 100, rng), 1e-4);
    }
  }
}

TEST(Mlp, InputGradientMatchesFiniteDifference) {
  Rng rng(5);
  Mlp<double> net({3, 10, 1}, Activation::Tanh, Activation::Linear, rng);
  Matrix x = Matrix::Random(3, 1);
  ForwardCache<double> cache;
  net.forward(x, cache);
  const Matrix dx = net.input_gradient(cache, Matrix::Ones(1, 1));
  for (Index i = 0; i < 3; ++i) {
    Matrix up = x, down = x;
    up(i, 0) += 1e-6;
    down(i, 0) -= 1e-6;
    const double fd = (net.forward(up)(0, 0) - net.forward(down)(0, 0)) / 2e-6;
    EXPECT_NEAR(dx(i, 0), fd, 1e-7);
  }
}

TEST(Mlp, SoftUpdateArithmetic) {
  auto live = Mlp<double>::zeros({1, 1}, Activation::Relu, Activation::Linear);
  auto target = live;
  live.layers()[0].weight(0, 0) = 1.0;
  target.soft_update_from(live, 0.005);
  EXPECT_DOUBLE_EQ(target.layers()[0].weight(0, 0), 0.005);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Rng rng(2);
  Mlp<double> net({2, 4, 1}, Activation::Relu, Activation::Linear, rng);
  const Mlp<double> before = net;
  Adam<double> opt(net, {});
  opt.step(net, net.zero_gradients());
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    EXPECT_EQ(net.layers()[l].weight, before.layers()[l].weight);
    EXPECT_EQ(net.layers()[l].bias, before.layers()[l].bias);
  }
}

TEST(Adam, FirstStepIsLearningRate) {
  auto net = Mlp<double>::zeros({1, 1}, Activation::Relu, Activation::Linear);
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  Adam<double> opt(net, cfg);
  auto g = net.zero_gradients();
  g.layers[0].weight(0, 0) = 1.0;
  opt.step(net, g);
  EXPECT_NEAR(net.layers()[0].weight(0, 0), -0.1, 1e-8);
}

TEST(Adam, ShapeMismatchThrows) {
  Rng rng(2);
  Mlp<double> net({2, 4, 1}, Activation::Relu, Activation::Linear, rng);
  Mlp<double> other({2, 5, 1}, Activation::Relu, Activation::Linear, rng);
  Adam<double> opt(net, {});
  EXPECT_THROW(opt.step(net, other.zero_gradients()), Error);
}

TEST(Adam, ConvexQuadraticDecreases) {
  // Minimise ||W x - y||^2 over a fixed batch; after warmup the loss is monotone.
  Rng rng(9);
  Mlp<double> net({4, 2}, Activation::Relu, Activation::Linear, rng);
  const Matrix x = Matrix::Random(4, 32);
  const Matrix y = Matrix::Random(2, 32);
  AdamConfig cfg;
  cfg.learning_rate = 1e-2;
  Adam<double> opt(net, cfg);
  double prev = 1e300;
  for (int k = 0; k < 300; ++k) {
    ForwardCache<double> cache;
    const Matrix out = net.forward(x, cache);
    const double loss = (out - y).squaredNorm() / 32;
    if (k >= 20) {
      EXPECT_LE(loss, prev + 1e-12) << "step " << k;
    }
    prev = loss;
    auto g = net.zero_gradients();
    net.backward(cache, 2.0 * (out - y) / 32, g);
    opt.step(net, g);
  }
}

TEST(ScalarAdam, FirstStep) {
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  ScalarAdam opt(cfg);
  EXPECT_NEAR(opt.step(1.0, 3.0), 0.9, 1e-8);
}

TEST(Gaussian, NllAtMeanUnitSigma) {
  GaussianHead<double> head;
  head.mean = Matrix::Zero(3, 1);
  head.log_std = Matrix::Zero(3, 1);
  head.raw = head.log_std;
  EXPECT_NEAR(gaussian_nll(head, Matrix(Matrix::Zero(3, 1))), 1.5 * std::log(2 * std::numbers::pi), 1e-12);
}

TEST(Gaussian, NllOneSigmaAway) {
  GaussianHead<double> head;
  head.mean = Matrix::Zero(1, 1);
  head.log_std = Matrix::Zero(1, 1);
  head.raw = head.log_std;
  EXPECT_NEAR(gaussian_nll(head, Matrix(Matrix::Ones(1, 1))), 0.5 + 0.5 * std::log(2 * std::numbers::pi), 1e-12);
}

TEST(Gaussian, ZeroMeanGradientAtTarget) {
  GaussianHead<double> head;
  head.mean = Matrix::Random(2, 3);
  head.log_std = Matrix::Random(2, 3);
  head.raw = head.log_std;
  Matrix dm, dl;
  gaussian_nll(head, head.mean, &dm, &dl);
  EXPECT_EQ(dm.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gaussian, NllGradientsMatchFiniteDifference) {
  const LogStdClamp clamp;
  Matrix raw = Matrix::Random(4, 5) * 3.0;
  const Matrix target = Matrix::Random(2, 5);
  const auto head = split_gaussian(raw, clamp);
  Matrix dm, dl;
  gaussian_nll(head, target, &dm, &dl);
  const Matrix draw = gaussian_head_backward(head, dm, dl, clamp);
  for (Index i = 0; i < raw.size(); ++i) {
    Matrix up = raw, down = raw;
    up.data()[i] += 1e-6;
    down.data()[i] -= 1e-6;
    const double fd =
        (gaussian_nll(split_gaussian(up, clamp), target) - gaussian_nll(split_gaussian(down, clamp), target)) / 2e-6;
    EXPECT_NEAR(draw.data()[i], fd, 1e-6);
  }
}

TEST(Gaussian, ClampKeepsLogStdInside) {
  const LogStdClamp clamp;
  for (double v : {-100.0, -5.0, 0.0, 2.0, 100.0}) {
    const double c = soft_clamp(v, clamp);
    EXPECT_GE(c, clamp.lo);
    EXPECT_LE(c, clamp.hi);
  }
  EXPECT_NEAR(soft_clamp(0.0, clamp), 0.0, 0.2);
}

TEST(Checkpoint, RoundTripIsExact) {
  Rng rng(4);
  Mlp<double> net({3, 7, 2}, Activation::Tanh, Activation::Linear, rng);
  std::stringstream ss;
  write_mlp(ss, net);
  const Mlp<double> back = read_mlp(ss);
  ASSERT_EQ(back.sizes(), net.sizes());
  EXPECT_EQ(back.hidden_activation(), Activation::Tanh);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    EXPECT_EQ(back.layers()[l].weight, net.layers()[l].weight);
    EXPECT_EQ(back.layers()[l].bias, net.layers()[l].bias);
  }
}

TEST(Checkpoint, RejectsWrongVersion) {
  std::stringstream ss("midl-mlp 99\n");
  EXPECT_THROW(read_mlp(ss), Error);
}
