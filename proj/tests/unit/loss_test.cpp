#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "prospect/nn/loss.hpp"

namespace prospect {
namespace {

TEST(WeightedBce, PerfectPredictionIsNearZero) {
  const std::vector<double> p{1.0, 0.0, 1.0};
  const std::vector<int> y{1, 0, 1};
  const ClassWeights w{3.0, 5.0};
  const auto r = weighted_bce_loss(p, y, w);
  EXPECT_GE(r.loss, 0.0);
  EXPECT_LE(r.loss, 5.0 * std::abs(std::log(1.0 - kProbabilityClamp)) + 1e-15);
}

TEST(WeightedBce, BalancedHalfIsLn2) {
  const std::vector<double> p{0.5, 0.5};
  const std::vector<int> y{1, 0};
  EXPECT_NEAR(weighted_bce_loss(p, y, {1.0, 1.0}).loss, std::log(2.0), 1e-12);
  EXPECT_NEAR(weighted_bce_loss(p, y, {1.0, 1.0}).loss, 0.693147, 1e-6);
}

TEST(WeightedBce, ClassOneWeightFour) {
  const std::vector<double> p{0.5, 0.5};
  const std::vector<int> y{1, 0};
  const auto r = weighted_bce_loss(p, y, {1.0, 4.0});
  EXPECT_NEAR(r.loss, 2.5 * std::log(2.0), 1e-12);
  EXPECT_NEAR(r.loss, 1.732868, 1e-6);
}

TEST(WeightedBce, Errors) {
  const std::vector<double> empty;
  const std::vector<int> no_labels;
  EXPECT_THROW(weighted_bce_loss(empty, no_labels, {}), ShapeError);
  const std::vector<double> p{0.2, 0.3};
  const std::vector<int> y{1};
  EXPECT_THROW(weighted_bce_loss(p, y, {}), ShapeError);
  const std::vector<int> bad{1, 2};
  EXPECT_THROW(weighted_bce_loss(p, bad, {}), DataError);
  const std::vector<int> ok{1, 0};
  EXPECT_THROW(weighted_bce_loss(p, ok, {0.0, 1.0}), ConfigError);
}

TEST(WeightedBce, UnitWeightsReduceToPlainBceGradient) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::vector<double> p(64);
  std::vector<int> y(64);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = u(rng);
    y[i] = static_cast<int>(i % 3 == 0);
  }
  const auto r = weighted_bce_loss(p, y, {1.0, 1.0});
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_NEAR(r.grad_logits[i], (p[i] - y[i]) / 64.0, 1e-12);
  }
}

TEST(WeightedBce, NonNegativeAndMatchesOracle) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + trial % 17;
    std::vector<double> p(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = u(rng);
      y[i] = u(rng) < 0.3 ? 1 : 0;
    }
    const ClassWeights w{0.1 + 5 * u(rng), 0.1 + 5 * u(rng)};
    const double loss = weighted_bce_loss(p, y, w).loss;
    EXPECT_GE(loss, 0.0);
    EXPECT_NEAR(loss, oracle::weighted_bce(p, y, w.w0, w.w1), 1e-10);
  }
}

TEST(Mse, ZeroDistance) {
  const auto x = Tensor2D::from_rows({{1, -2}, {0.5, 3}});
  EXPECT_EQ(mse_reconstruction_loss(x, x).loss, 0.0);
}

TEST(Mse, UnitOffset) {
  const auto x = Tensor2D::from_rows({{0, 0}});
  const auto xp = Tensor2D::from_rows({{1, 1}});
  const auto r = mse_reconstruction_loss(x, xp);
  EXPECT_DOUBLE_EQ(r.loss, 1.0);
  EXPECT_DOUBLE_EQ(r.grad(0, 0), 1.0);
}

TEST(Mse, MatchesScalarOracle) {
  Rng rng(9);
  std::normal_distribution<double> n;
  Tensor2D a(6, 5), b(6, 5);
  for (double& v : a.values()) v = n(rng);
  for (double& v : b.values()) v = n(rng);
  EXPECT_NEAR(mse_reconstruction_loss(a, b).loss, oracle::mse(oracle::to_rows(a), oracle::to_rows(b)), 1e-12);
  EXPECT_THROW(mse_reconstruction_loss(a, Tensor2D(6, 4)), ShapeError);
}

}  // namespace
}  // namespace prospect
