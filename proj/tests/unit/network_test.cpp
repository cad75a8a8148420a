#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../support/gradcheck.hpp"
#include "../support/oracles.hpp"
#include "prospect/nn/loss.hpp"
#include "prospect/nn/network.hpp"
#include "prospect/nn/optimizer.hpp"

namespace prospect {
namespace {

DenseLayer identity_layer(std::size_t n, Activation act) {
  DenseLayer l;
  l.weights = Tensor2D(n, n);
  for (std::size_t i = 0; i < n; ++i) l.weights(i, i) = 1.0;
  l.bias.assign(n, 0.0);
  l.activation = act;
  return l;
}

Tensor2D random_tensor(std::size_t r, std::size_t c, Rng& rng) {
  std::normal_distribution<double> n;
  Tensor2D t(r, c);
  for (double& v : t.values()) v = n(rng);
  return t;
}

TEST(Forward, IdentityLayerPassesThrough) {
  Network net(3, {identity_layer(3, Activation::identity)});
  const auto x = Tensor2D::from_rows({{1, -2, 3}, {0.5, 0, -7}});
  EXPECT_EQ(net.predict(x), x);
}

TEST(Forward, ReluClampsNegatives) {
  Network net(2, {identity_layer(2, Activation::relu)});
  EXPECT_EQ(net.predict(Tensor2D::from_rows({{-1, 2}})), Tensor2D::from_rows({{0, 2}}));
}

TEST(Forward, MatchesScalarOracle) {
  Rng rng(42);
  const std::vector<LayerSpec> specs{{6, Activation::relu, true, 0.0}, {3, Activation::sigmoid, false, 0.0}};
  Network net(4, specs, rng);
  auto& bn = *net.mutable_layer(0).batch_norm;
  for (std::size_t i = 0; i < bn.width(); ++i) {
    bn.running_mean[i] = 0.1 * static_cast<double>(i);
    bn.running_var[i] = 0.5 + 0.2 * static_cast<double>(i);
    bn.gamma[i] = 1.0 + 0.1 * static_cast<double>(i);
  }
  const auto x = random_tensor(7, 4, rng);
  for (const bool train : {false, true}) {
    const auto got = net.forward(x, train ? Mode::train : Mode::eval).output;
    const auto want = oracle::forward(net, oracle::to_rows(x), train).output;
    for (std::size_t r = 0; r < 7; ++r) {
      for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(got(r, c), want[r][c], 1e-12);
    }
  }
}

TEST(Forward, Errors) {
  Rng rng(1);
  const std::vector<LayerSpec> specs{{2, Activation::relu, false, 0.5}};
  Network net(3, specs, rng);
  EXPECT_THROW(net.forward(Tensor2D(2, 4), Mode::eval), ShapeError);
  EXPECT_THROW(net.forward(Tensor2D(2, 3), Mode::train, nullptr), ConfigError);
  auto x = Tensor2D(1, 3, 1.0);
  x(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(net.forward(x, Mode::eval), NonFiniteError);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(2);
  const std::vector<LayerSpec> specs{{5, Activation::relu, true, 0.0}, {2, Activation::identity, false, 0.0}};
  Network net(3, specs, rng);
  const auto fwd = net.forward(random_tensor(4, 3, rng), Mode::train);
  const auto g = net.backward(fwd.cache, Tensor2D(4, 2), GradientAt::output, true);
  for (const auto block : g.flatten()) {
    for (const double v : block) EXPECT_EQ(v, 0.0);
  }
  for (const double v : g.input.values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, SmallNetMatchesFiniteDifferences) {
  Rng rng(7);
  const std::vector<LayerSpec> specs{{3, Activation::relu, false, 0.0}, {1, Activation::sigmoid, false, 0.0}};
  Network net(4, specs, rng);
  const auto x = random_tensor(5, 4, rng);
  ASSERT_GT(oracle::forward(net, oracle::to_rows(x), true).min_abs_relu_preactivation, 1e-3);
  const std::vector<int> y{1, 0, 0, 1, 0};
  const ClassWeights w{1.0, 4.0};

  const auto fwd = net.forward(x, Mode::train);
  std::vector<double> p(fwd.output.values().begin(), fwd.output.values().end());
  const auto loss = weighted_bce_loss(p, y, w);
  const auto grads = net.backward(fwd.cache, Tensor2D(5, 1, loss.grad_logits), GradientAt::logits);
  std::vector<double> analytic;
  for (const auto b : grads.flatten()) analytic.insert(analytic.end(), b.begin(), b.end());

  const auto numeric = oracle::finite_difference(net, [&](const Network& n) {
    const auto out = oracle::forward(n, oracle::to_rows(x), true).output;
    std::vector<double> q;
    for (const auto& row : out) q.push_back(row[0]);
    return oracle::weighted_bce(q, y, w.w0, w.w1);
  });
  ASSERT_EQ(analytic.size(), numeric.size());
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    EXPECT_LT(oracle::relative_error(analytic[i], numeric[i]), 1e-4) << "parameter " << i;
  }
}

TEST(Backward, RandomNetsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    for (const bool bn : {false, true}) {
      for (const auto kind : {testing::LossKind::weighted_bce, testing::LossKind::mse}) {
        const auto r = testing::gradient_check(1000 + seed, kind, bn);
        EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed << " bn " << bn;
      }
    }
  }
}

TEST(Backward, InputGradientMatchesFiniteDifferences) {
  Rng rng(13);
  const std::vector<LayerSpec> specs{{4, Activation::sigmoid, true, 0.0}, {2, Activation::identity, false, 0.0}};
  Network net(3, specs, rng);
  auto x = random_tensor(4, 3, rng);
  const auto target = random_tensor(4, 2, rng);
  const auto fwd = net.forward(x, Mode::train);
  const auto g = net.backward(fwd.cache, mse_reconstruction_loss(target, fwd.output).grad, GradientAt::output, true);
  const double h = 1e-5;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x.values()[i];
    x.values()[i] = saved + h;
    const double up = oracle::mse(oracle::to_rows(target), oracle::forward(net, oracle::to_rows(x), true).output);
    x.values()[i] = saved - h;
    const double down = oracle::mse(oracle::to_rows(target), oracle::forward(net, oracle::to_rows(x), true).output);
    x.values()[i] = saved;
    EXPECT_LT(oracle::relative_error(g.input.values()[i], (up - down) / (2 * h)), 1e-4);
  }
}

TEST(Backward, FrozenLayersGetNoGradientsOrUpdates) {
  Rng rng(3);
  const std::vector<LayerSpec> specs{{4, Activation::relu, true, 0.0}, {1, Activation::sigmoid, false, 0.0}};
  Network net(3, specs, rng);
  net.mutable_layer(0).frozen = true;
  const auto before = net.layer(0);
  const auto fwd = net.forward(random_tensor(6, 3, rng), Mode::train);
  const auto g = net.backward(fwd.cache, Tensor2D(6, 1, 0.1), GradientAt::logits);
  EXPECT_FALSE(g.layers[0].has_value());
  ASSERT_TRUE(g.layers[1].has_value());
  Optimizer opt(OptimizerConfig{});
  apply_gradients(net, g, opt);
  net.commit_batch_stats(fwd.cache);
  EXPECT_EQ(net.layer(0).weights, before.weights);
  EXPECT_EQ(net.layer(0).bias, before.bias);
  EXPECT_EQ(net.layer(0).batch_norm->running_mean, before.batch_norm->running_mean);
}

TEST(Backward, StaleOrEvalCacheRejected) {
  Rng rng(4);
  const std::vector<LayerSpec> specs{{2, Activation::identity, false, 0.0}};
  Network net(2, specs, rng);
  const auto x = random_tensor(3, 2, rng);
  const auto eval = net.forward(x, Mode::eval);
  EXPECT_THROW(net.backward(eval.cache, Tensor2D(3, 2)), ConfigError);
  const auto fwd = net.forward(x, Mode::train);
  const auto g = net.backward(fwd.cache, Tensor2D(3, 2, 1.0));
  Optimizer opt(OptimizerConfig{});
  apply_gradients(net, g, opt);
  EXPECT_THROW(net.backward(fwd.cache, Tensor2D(3, 2, 1.0)), ConfigError);
  Network copy = net;
  const auto fresh = net.forward(x, Mode::train);
  EXPECT_THROW(copy.backward(fresh.cache, Tensor2D(3, 2)), ConfigError);
  EXPECT_THROW(net.backward(fresh.cache, Tensor2D(2, 2)), ShapeError);
}

TEST(Dropout, TrainExpectationMatchesEval) {
  Rng rng(21);
  const std::vector<LayerSpec> specs{{4, Activation::relu, false, 0.5}};
  Network net(3, specs, rng);
  const auto x = Tensor2D::from_rows({{0.4, -0.3, 1.2}});
  const auto eval = net.predict(x);
  constexpr int kMasks = 20000;
  std::vector<double> sum(4, 0.0), sum_sq(4, 0.0);
  Rng mask_rng(99);
  for (int i = 0; i < kMasks; ++i) {
    const auto out = net.forward(x, Mode::train, &mask_rng).output;
    for (std::size_t c = 0; c < 4; ++c) {
      sum[c] += out(0, c);
      sum_sq[c] += out(0, c) * out(0, c);
    }
  }
  for (std::size_t c = 0; c < 4; ++c) {
    const double mean = sum[c] / kMasks;
    const double var = sum_sq[c] / kMasks - mean * mean;
    const double se = std::sqrt(std::max(var, 0.0) / kMasks);
    EXPECT_LE(std::abs(mean - eval(0, c)), 3.0 * se + 1e-12) << "unit " << c;
  }
}

Network train_a_little(std::uint64_t seed, const Tensor2D& x, const std::vector<int>& y) {
  Rng rng(seed);
  const std::vector<LayerSpec> specs{{8, Activation::relu, true, 0.5}, {1, Activation::sigmoid, false, 0.0}};
  Network net(x.cols(), specs, rng);
  Optimizer opt(OptimizerConfig{OptimizerKind::sgd_momentum, 0.05, 0.9});
  for (int step = 0; step < 20; ++step) {
    const auto fwd = net.forward(x, Mode::train, &rng);
    std::vector<double> p(fwd.output.values().begin(), fwd.output.values().end());
    const auto loss = weighted_bce_loss(p, y, {1.0, 2.0});
    const auto g = net.backward(fwd.cache, Tensor2D(x.rows(), 1, loss.grad_logits), GradientAt::logits);
    apply_gradients(net, g, opt);
    net.commit_batch_stats(fwd.cache);
  }
  return net;
}

TEST(Training, DeterministicGivenSeed) {
  Rng rng(5);
  const auto x = random_tensor(16, 3, rng);
  std::vector<int> y(16);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x(i, 0) > 0 ? 1 : 0;
  const auto a = train_a_little(77, x, y);
  const auto b = train_a_little(77, x, y);
  for (std::size_t li = 0; li < a.depth(); ++li) {
    EXPECT_EQ(a.layer(li).weights, b.layer(li).weights);
    EXPECT_EQ(a.layer(li).bias, b.layer(li).bias);
  }
  EXPECT_EQ(a.predict(x), b.predict(x));
}

TEST(BatchNorm, EvalIsIndependentOfBatchComposition) {
  Rng rng(6);
  const auto x = random_tensor(10, 3, rng);
  std::vector<int> y(10);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 2);
  const auto net = train_a_little(8, x, y);
  const auto batched = net.predict(x);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const std::vector<std::size_t> one{r};
    EXPECT_EQ(net.predict(x.select_rows(one))(0, 0), batched(r, 0));
  }
}

}  // namespace
}  // namespace prospect
