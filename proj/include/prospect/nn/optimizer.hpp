#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prospect/error.hpp"
#include "prospect/nn/network.hpp"

namespace prospect {

enum class OptimizerKind : std::uint8_t { sgd_momentum, adam, adamw };

inline std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd_momentum: return "sgd_momentum";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::adamw: return "adamw";
  }
  return "unknown";
}

inline OptimizerKind parse_optimizer_kind(std::string_view s) {
  if (s == "sgd_momentum" || s == "sgd") return OptimizerKind::sgd_momentum;
  if (s == "adam") return OptimizerKind::adam;
  if (s == "adamw") return OptimizerKind::adamw;
  throw ConfigError("unknown optimizer '" + std::string(s) + "'");
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd_momentum;
  double learning_rate = 1e-4;
  double momentum = 0.92;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;

  static OptimizerConfig adam(double lr = 1e-3) {
    OptimizerConfig c;
    c.kind = OptimizerKind::adam;
    c.learning_rate = lr;
    c.momentum = 0.0;
    return c;
  }

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0,1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw ConfigError("adam betas must be in [0,1)");
    }
    if (!(epsilon > 0.0)) throw ConfigError("adam epsilon must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  }
};

/// First-order optimizer with per-tensor state.
///
/// sgd_momentum uses the classical form  v <- mu v + g;  p <- p - lr v.
/// adam adds weight_decay * p to the gradient (L2); adamw decays the
/// parameter directly:  p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd p).
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const OptimizerConfig& config() const noexcept { return cfg_; }
  std::uint64_t steps() const noexcept { return steps_; }

  void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads) {
    if (params.size() != grads.size()) throw ShapeError("optimizer: parameter/gradient tensor counts differ");
    if (first_.empty()) {
      first_.resize(params.size());
      second_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        first_[i].assign(params[i].size(), 0.0);
        if (cfg_.kind != OptimizerKind::sgd_momentum) second_[i].assign(params[i].size(), 0.0);
      }
    }
    if (first_.size() != params.size()) throw ShapeError("optimizer: tensor count changed between steps");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].size() != grads[i].size() || first_[i].size() != params[i].size()) {
        throw ShapeError("optimizer: tensor " + std::to_string(i) + " size mismatch");
      }
      for (const double g : grads[i]) {
        if (!std::isfinite(g)) throw NonFiniteError("optimizer: non-finite gradient");
      }
    }

    ++steps_;
    const double lr = cfg_.learning_rate;
    switch (cfg_.kind) {
      case OptimizerKind::sgd_momentum:
        for (std::size_t i = 0; i < params.size(); ++i) {
          auto p = params[i];
          const auto g = grads[i];
          auto& v = first_[i];
          for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = g[j] + cfg_.weight_decay * p[j];
            v[j] = cfg_.momentum * v[j] + gj;
            p[j] -= lr * v[j];
          }
        }
        break;
      case OptimizerKind::adam:
      case OptimizerKind::adamw: {
        const bool decoupled = cfg_.kind == OptimizerKind::adamw;
        const double t = static_cast<double>(steps_);
        const double c1 = 1.0 - std::pow(cfg_.beta1, t);
        const double c2 = 1.0 - std::pow(cfg_.beta2, t);
        for (std::size_t i = 0; i < params.size(); ++i) {
          auto p = params[i];
          const auto g = grads[i];
          auto& m = first_[i];
          auto& v = second_[i];
          for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = decoupled ? g[j] : g[j] + cfg_.weight_decay * p[j];
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
            double update = (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.epsilon);
            if (decoupled) update += cfg_.weight_decay * p[j];
            p[j] -= lr * update;
          }
        }
        break;
      }
    }
  }

 private:
  OptimizerConfig cfg_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

/// Applies one optimizer step to every unfrozen layer of `net`.
inline void apply_gradients(Network& net, const Gradients& grads, Optimizer& opt) {
  const auto g = grads.flatten();
  const auto p = net.trainable_parameters();
  opt.step(p, g);
}

}  // namespace prospect
