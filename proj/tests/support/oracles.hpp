#pragma once

// Independent reference implementations used only by the test suites. They
// deliberately avoid the library's matmul/loss code paths: everything here is
// plain scalar loops over the same parameters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "prospect/nn/loss.hpp"
#include "prospect/nn/network.hpp"

namespace prospect::oracle {

struct ScalarForward {
  std::vector<std::vector<double>> output;          // rows x out
  double min_abs_relu_preactivation = std::numeric_limits<double>::infinity();
};

/// Forward pass with explicit loops. `batch_stats` selects train-mode batch
/// normalization (batch mean / population variance); otherwise running stats.
/// Dropout is never applied.
inline ScalarForward forward(const Network& net, const std::vector<std::vector<double>>& x, bool batch_stats) {
  ScalarForward out;
  auto cur = x;
  for (const auto& layer : net.layers()) {
    const std::size_t n = cur.size();
    const std::size_t in = layer.in_width();
    const std::size_t width = layer.out_width();
    std::vector<std::vector<double>> z(n, std::vector<double>(width, 0.0));
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < width; ++j) {
        double s = layer.bias[j];
        for (std::size_t i = 0; i < in; ++i) s += cur[r][i] * layer.weights(i, j);
        z[r][j] = s;
      }
    }
    if (layer.batch_norm) {
      const auto& bn = *layer.batch_norm;
      for (std::size_t j = 0; j < width; ++j) {
        double mean = bn.running_mean[j];
        double var = bn.running_var[j];
        if (batch_stats) {
          mean = 0.0;
          for (std::size_t r = 0; r < n; ++r) mean += z[r][j];
          mean /= static_cast<double>(n);
          var = 0.0;
          for (std::size_t r = 0; r < n; ++r) var += (z[r][j] - mean) * (z[r][j] - mean);
          var /= static_cast<double>(n);
        }
        for (std::size_t r = 0; r < n; ++r) {
          z[r][j] = bn.gamma[j] * (z[r][j] - mean) / std::sqrt(var + bn.epsilon) + bn.beta[j];
        }
      }
    }
    for (auto& row : z) {
      for (double& v : row) {
        switch (layer.activation) {
          case Activation::identity: break;
          case Activation::relu:
            out.min_abs_relu_preactivation = std::min(out.min_abs_relu_preactivation, std::abs(v));
            v = std::max(v, 0.0);
            break;
          case Activation::sigmoid: v = 1.0 / (1.0 + std::exp(-v)); break;
        }
      }
    }
    cur = std::move(z);
  }
  out.output = std::move(cur);
  return out;
}

inline std::vector<std::vector<double>> to_rows(const Tensor2D& t) {
  std::vector<std::vector<double>> rows(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) rows[r].assign(t.row(r).begin(), t.row(r).end());
  return rows;
}

inline double weighted_bce(const std::vector<double>& p, const std::vector<int>& y, double w0, double w1) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double q = p[i];
    if (q < 1e-7) q = 1e-7;
    if (q > 1.0 - 1e-7) q = 1.0 - 1e-7;
    const double term = y[i] == 1 ? w1 * std::log(q) : w0 * std::log(1.0 - q);
    total += term;
  }
  return -total / static_cast<double>(p.size());
}

inline double mse(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t c = 0; c < a[r].size(); ++c) {
      total += (a[r][c] - b[r][c]) * (a[r][c] - b[r][c]);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

inline double gini(const std::vector<double>& counts) {
  double n = 0.0;
  for (double c : counts) n += c;
  double s = 1.0;
  for (double c : counts) s -= (c / n) * (c / n);
  return s;
}

struct ScalarMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f_beta = 0.0;
  double accuracy = 0.0;
};

// Counts each cell with its own pass over the data.
inline ScalarMetrics confusion_metrics(const std::vector<int>& pred, const std::vector<int>& y, double beta) {
  double tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < y.size(); ++i) tp += pred[i] == 1 && y[i] == 1 ? 1 : 0;
  for (std::size_t i = 0; i < y.size(); ++i) fp += pred[i] == 1 && y[i] == 0 ? 1 : 0;
  for (std::size_t i = 0; i < y.size(); ++i) fn += pred[i] == 0 && y[i] == 1 ? 1 : 0;
  for (std::size_t i = 0; i < y.size(); ++i) tn += pred[i] == 0 && y[i] == 0 ? 1 : 0;
  ScalarMetrics m;
  m.accuracy = (tp + tn) / static_cast<double>(y.size());
  if (tp + fp > 0) m.precision = tp / (tp + fp);
  if (tp + fn > 0) m.recall = tp / (tp + fn);
  // F-beta as the weighted harmonic mean of P and R
  if (m.precision > 0 && m.recall > 0) {
    const double b2 = beta * beta;
    m.f_beta = (1 + b2) / (b2 / m.recall + 1 / m.precision);
  }
  return m;
}

/// Every scalar parameter of the network, visited by (layer, pointer-getter).
inline std::vector<std::function<double&(Network&)>> parameter_refs(const Network& net) {
  std::vector<std::function<double&(Network&)>> refs;
  for (std::size_t li = 0; li < net.depth(); ++li) {
    const auto& l = net.layer(li);
    for (std::size_t k = 0; k < l.weights.size(); ++k) {
      refs.emplace_back([li, k](Network& n) -> double& { return n.mutable_layer(li).weights.values()[k]; });
    }
    for (std::size_t k = 0; k < l.bias.size(); ++k) {
      refs.emplace_back([li, k](Network& n) -> double& { return n.mutable_layer(li).bias[k]; });
    }
    if (l.batch_norm) {
      for (std::size_t k = 0; k < l.out_width(); ++k) {
        refs.emplace_back([li, k](Network& n) -> double& { return n.mutable_layer(li).batch_norm->gamma[k]; });
      }
      for (std::size_t k = 0; k < l.out_width(); ++k) {
        refs.emplace_back([li, k](Network& n) -> double& { return n.mutable_layer(li).batch_norm->beta[k]; });
      }
    }
  }
  return refs;
}

/// Central finite difference of `loss` with respect to every parameter.
inline std::vector<double> finite_difference(Network net, const std::function<double(const Network&)>& loss,
                                             double h = 1e-5) {
  const auto refs = parameter_refs(net);
  std::vector<double> out(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    double& p = refs[i](net);
    const double saved = p;
    refs[i](net) = saved + h;
    const double up = loss(net);
    refs[i](net) = saved - h;
    const double down = loss(net);
    refs[i](net) = saved;
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

/// |a - b| / max(|a|, |b|, floor). The floor keeps analytically-zero
/// gradients (e.g. a bias feeding batch norm) from dividing central-difference
/// roundoff, which is ~1e-10 at h = 1e-5, by zero.
inline double relative_error(double a, double b, double floor = 1e-5) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace prospect::oracle
