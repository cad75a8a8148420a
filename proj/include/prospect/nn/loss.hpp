#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "prospect/error.hpp"
#include "prospect/nn/tensor.hpp"

namespace prospect {

/// Probabilities are clamped to [eps, 1 - eps] before taking logs.
inline constexpr double kProbabilityClamp = 1e-7;

/// Per-class multipliers of the cross-entropy terms.
struct ClassWeights {
  double w0 = 1.0;
  double w1 = 1.0;

  void validate() const {
    if (!(w0 > 0.0) || !(w1 > 0.0) || !std::isfinite(w0) || !std::isfinite(w1)) {
      throw ConfigError("class weights must be positive and finite");
    }
  }
  bool operator==(const ClassWeights&) const = default;
};

struct BceResult {
  double loss = 0.0;
  std::vector<double> grad_logits;  // d loss / d logit_i
};

/// loss = -(1/N) sum [w1 y log p + w0 (1-y) log(1-p)], p clamped.
/// The gradient is taken with respect to the logit z (p = sigmoid(z)) using the
/// unclamped p: (1/N) [w1 y (p - 1) + w0 (1 - y) p].
inline BceResult weighted_bce_loss(std::span<const double> p, std::span<const int> y, ClassWeights w) {
  if (p.empty()) throw ShapeError("weighted_bce_loss: empty batch");
  if (p.size() != y.size()) throw ShapeError("weighted_bce_loss: probability and label lengths differ");
  w.validate();
  const double n = static_cast<double>(p.size());
  BceResult out;
  out.grad_logits.resize(p.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) throw NonFiniteError("weighted_bce_loss: probability outside [0,1]");
    if (y[i] != 0 && y[i] != 1) throw DataError("weighted_bce_loss: label must be 0 or 1");
    const double pc = std::clamp(p[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    if (y[i] == 1) {
      sum += w.w1 * std::log(pc);
      out.grad_logits[i] = w.w1 * (p[i] - 1.0) / n;
    } else {
      sum += w.w0 * std::log1p(-pc);
      out.grad_logits[i] = w.w0 * p[i] / n;
    }
  }
  out.loss = -sum / n;
  return out;
}

struct MseResult {
  double loss = 0.0;
  Tensor2D grad;  // d loss / d x_prime
};

/// Mean squared error over every entry; gradient 2 (x' - x) / count.
inline MseResult mse_reconstruction_loss(const Tensor2D& x, const Tensor2D& x_prime) {
  if (x.rows() != x_prime.rows() || x.cols() != x_prime.cols()) {
    throw ShapeError("mse_reconstruction_loss: shapes differ");
  }
  if (x.empty()) throw ShapeError("mse_reconstruction_loss: empty input");
  const double count = static_cast<double>(x.size());
  MseResult out;
  out.grad = Tensor2D(x.rows(), x.cols());
  const auto a = x.values();
  const auto b = x_prime.values();
  auto g = out.grad.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = b[i] - a[i];
    sum += d * d;
    g[i] = 2.0 * d / count;
  }
  out.loss = sum / count;
  if (!std::isfinite(out.loss)) throw NonFiniteError("mse_reconstruction_loss: non-finite loss");
  return out;
}

}  // namespace prospect
