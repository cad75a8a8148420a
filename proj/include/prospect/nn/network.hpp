#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prospect/error.hpp"
#include "prospect/nn/tensor.hpp"
#include "prospect/random.hpp"

namespace prospect {

enum class Activation : std::uint8_t { identity = 0, relu = 1, sigmoid = 2 };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "unknown";
}

inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Per-feature batch normalization parameters and running statistics.
/// Running stats follow r <- momentum * r + (1 - momentum) * batch_stat.
struct BatchNormState {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.9;
  double epsilon = 1e-5;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t width)
      : gamma(width, 1.0), beta(width, 0.0), running_mean(width, 0.0), running_var(width, 1.0) {}

  std::size_t width() const noexcept { return gamma.size(); }

  void validate(std::size_t expected_width) const {
    if (gamma.size() != expected_width || beta.size() != expected_width ||
        running_mean.size() != expected_width || running_var.size() != expected_width) {
      throw ShapeError("batch-norm vectors do not match layer width");
    }
    if (!(momentum > 0.0 && momentum < 1.0)) throw ConfigError("batch-norm momentum must be in (0,1)");
    if (!(epsilon > 0.0)) throw ConfigError("batch-norm epsilon must be positive");
    for (const double v : running_var) {
      if (!(v >= 0.0)) throw ConfigError("batch-norm running variance must be >= 0");
    }
  }
};

/// Fully connected layer: linear -> [batch norm] -> activation -> [dropout].
struct DenseLayer {
  Tensor2D weights;  // in x out
  std::vector<double> bias;
  Activation activation = Activation::identity;
  std::optional<BatchNormState> batch_norm;
  double dropout_p = 0.0;
  bool frozen = false;

  std::size_t in_width() const noexcept { return weights.rows(); }
  std::size_t out_width() const noexcept { return weights.cols(); }

  void validate() const {
    if (bias.size() != out_width()) throw ShapeError("bias length does not match layer width");
    if (batch_norm) batch_norm->validate(out_width());
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout probability must be in [0,1)");
  }
};

struct LayerSpec {
  std::size_t width = 0;
  Activation activation = Activation::relu;
  bool batch_norm = false;
  double dropout_p = 0.0;
};

enum class Mode { train, eval };

/// Where the upstream gradient handed to backward() lives: at the network
/// output, or at the input of the final activation (the logits).
enum class GradientAt { output, logits };

struct LayerCache {
  Tensor2D input;
  Tensor2D normalized;  // batch-norm x-hat; empty without batch norm
  std::vector<double> inv_std;
  std::vector<double> batch_mean;
  std::vector<double> batch_var;
  Tensor2D activated;  // after activation, before dropout
  Tensor2D mask;       // inverted-dropout scale factors; empty when dropout is off
};

struct ForwardCache {
  std::uint64_t network_id = 0;
  std::uint64_t generation = 0;
  Mode mode = Mode::eval;
  std::size_t batch_rows = 0;
  std::vector<LayerCache> layers;
};

struct ForwardResult {
  Tensor2D output;
  ForwardCache cache;
};

struct LayerGradients {
  Tensor2D weights;
  std::vector<double> bias;
  std::vector<double> gamma;  // empty without batch norm
  std::vector<double> beta;
};

/// Parameter gradients per layer; frozen layers hold no entry.
struct Gradients {
  std::vector<std::optional<LayerGradients>> layers;
  Tensor2D input;  // filled only when requested

  /// Views in the same order as Network::trainable_parameters().
  std::vector<std::span<const double>> flatten() const {
    std::vector<std::span<const double>> out;
    for (const auto& g : layers) {
      if (!g) continue;
      out.emplace_back(g->weights.values());
      out.emplace_back(g->bias);
      if (!g->gamma.empty()) {
        out.emplace_back(g->gamma);
        out.emplace_back(g->beta);
      }
    }
    return out;
  }
};

namespace detail {
/// Identity of a live network object; copies get a fresh identity so a cache
/// recorded on one object is never accepted by another.
class InstanceId {
 public:
  InstanceId() : value_(next()) {}
  InstanceId(const InstanceId&) : value_(next()) {}
  InstanceId& operator=(const InstanceId&) {
    value_ = next();
    return *this;
  }
  std::uint64_t value() const noexcept { return value_; }

 private:
  static std::uint64_t next() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
  }
  std::uint64_t value_;
};
}  // namespace detail

/// A stack of dense layers.
class Network {
 public:
  Network() = default;

  /// He-style uniform initialization, U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero bias.
  Network(std::size_t input_width, std::span<const LayerSpec> specs, Rng& rng) {
    std::size_t fan_in = input_width;
    for (const auto& spec : specs) {
      if (spec.width == 0) throw ConfigError("layer width must be positive");
      DenseLayer layer;
      layer.weights = Tensor2D(fan_in, spec.width);
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (double& w : layer.weights.values()) w = dist(rng);
      layer.bias.assign(spec.width, 0.0);
      layer.activation = spec.activation;
      if (spec.batch_norm) layer.batch_norm = BatchNormState(spec.width);
      layer.dropout_p = spec.dropout_p;
      layer.validate();
      layers_.push_back(std::move(layer));
      fan_in = spec.width;
    }
    input_width_ = input_width;
  }

  Network(std::size_t input_width, std::vector<DenseLayer> layers)
      : input_width_(input_width), layers_(std::move(layers)) {
    std::size_t width = input_width_;
    for (const auto& layer : layers_) {
      if (layer.in_width() != width) throw ShapeError("layer input width does not chain");
      layer.validate();
      width = layer.out_width();
    }
  }

  std::size_t input_width() const noexcept { return input_width_; }
  std::size_t output_width() const noexcept {
    return layers_.empty() ? input_width_ : layers_.back().out_width();
  }
  std::size_t depth() const noexcept { return layers_.size(); }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }

  /// Widths from input to output, e.g. {d, 256, 128, 32}.
  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w{input_width_};
    for (const auto& l : layers_) w.push_back(l.out_width());
    return w;
  }

  std::uint64_t generation() const noexcept { return generation_; }

  void freeze() noexcept {
    for (auto& l : layers_) l.frozen = true;
  }
  bool frozen() const noexcept {
    for (const auto& l : layers_) {
      if (!l.frozen) return false;
    }
    return true;
  }

  /// Mutable views of every trainable tensor: weights, bias, [gamma, beta] per
  /// unfrozen layer. Taking them counts as a parameter update.
  std::vector<std::span<double>> trainable_parameters() {
    ++generation_;
    std::vector<std::span<double>> out;
    for (auto& l : layers_) {
      if (l.frozen) continue;
      out.emplace_back(l.weights.values());
      out.emplace_back(l.bias);
      if (l.batch_norm) {
        out.emplace_back(l.batch_norm->gamma);
        out.emplace_back(l.batch_norm->beta);
      }
    }
    return out;
  }

  /// Mutable access to a layer for tests and deserialization.
  DenseLayer& mutable_layer(std::size_t i) {
    ++generation_;
    return layers_.at(i);
  }

  ForwardResult forward(const Tensor2D& batch, Mode mode, Rng* rng = nullptr) const {
    if (batch.cols() != input_width_) {
      throw ShapeError("forward: batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                       std::to_string(input_width_));
    }
    require_finite(batch, "forward input");
    const bool train = mode == Mode::train;
    ForwardResult result;
    result.cache.network_id = id_.value();
    result.cache.generation = generation_;
    result.cache.mode = mode;
    result.cache.batch_rows = batch.rows();
    if (train) result.cache.layers.resize(layers_.size());

    Tensor2D x = batch;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const DenseLayer& layer = layers_[li];
      Tensor2D out = matmul(x, layer.weights);
      const std::size_t rows = out.rows();
      const std::size_t width = out.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        double* o = out.row(r).data();
        for (std::size_t c = 0; c < width; ++c) o[c] += layer.bias[c];
      }

      LayerCache* lc = train ? &result.cache.layers[li] : nullptr;
      if (layer.batch_norm) {
        const BatchNormState& bn = *layer.batch_norm;
        std::vector<double> mean(width, 0.0);
        std::vector<double> var(width, 0.0);
        if (train) {
          if (rows == 0) throw ShapeError("batch norm needs at least one row in train mode");
          for (std::size_t r = 0; r < rows; ++r) {
            const double* o = out.row(r).data();
            for (std::size_t c = 0; c < width; ++c) mean[c] += o[c];
          }
          for (double& m : mean) m /= static_cast<double>(rows);
          for (std::size_t r = 0; r < rows; ++r) {
            const double* o = out.row(r).data();
            for (std::size_t c = 0; c < width; ++c) {
              const double d = o[c] - mean[c];
              var[c] += d * d;
            }
          }
          for (double& v : var) v /= static_cast<double>(rows);
        } else {
          mean = bn.running_mean;
          var = bn.running_var;
        }
        std::vector<double> inv_std(width);
        for (std::size_t c = 0; c < width; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + bn.epsilon);
        Tensor2D normalized(rows, width);
        for (std::size_t r = 0; r < rows; ++r) {
          double* o = out.row(r).data();
          double* n = normalized.row(r).data();
          for (std::size_t c = 0; c < width; ++c) {
            n[c] = (o[c] - mean[c]) * inv_std[c];
            o[c] = bn.gamma[c] * n[c] + bn.beta[c];
          }
        }
        if (lc) {
          lc->normalized = std::move(normalized);
          lc->inv_std = std::move(inv_std);
          lc->batch_mean = std::move(mean);
          lc->batch_var = std::move(var);
        }
      }

      switch (layer.activation) {
        case Activation::identity: break;
        case Activation::relu:
          for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
          break;
        case Activation::sigmoid:
          for (double& v : out.values()) v = sigmoid(v);
          break;
      }

      if (lc) {
        lc->input = std::move(x);
        lc->activated = out;
        if (layer.dropout_p > 0.0) {
          if (rng == nullptr) throw ConfigError("train-mode dropout requires a random generator");
          const double keep = 1.0 - layer.dropout_p;
          const double scale = 1.0 / keep;
          std::bernoulli_distribution keep_dist(keep);
          lc->mask = Tensor2D(rows, width);
          auto mask = lc->mask.values();
          auto vals = out.values();
          for (std::size_t i = 0; i < vals.size(); ++i) {
            mask[i] = keep_dist(*rng) ? scale : 0.0;
            vals[i] *= mask[i];
          }
        }
      }
      require_finite(out, "layer " + std::to_string(li) + " output");
      x = std::move(out);
    }
    result.output = std::move(x);
    return result;
  }

  /// Eval-mode forward pass.
  Tensor2D predict(const Tensor2D& batch) const { return forward(batch, Mode::eval).output; }

  Gradients backward(const ForwardCache& cache, const Tensor2D& upstream,
                     GradientAt at = GradientAt::output, bool need_input_grad = false) const {
    if (cache.mode != Mode::train) throw ConfigError("backward requires a train-mode forward cache");
    if (cache.network_id != id_.value() || cache.generation != generation_ ||
        cache.layers.size() != layers_.size()) {
      throw ConfigError("backward: stale or mismatched forward cache");
    }
    if (upstream.rows() != cache.batch_rows || upstream.cols() != output_width()) {
      throw ShapeError("backward: upstream gradient shape does not match forward output");
    }
    require_finite(upstream, "upstream gradient");

    std::size_t lowest_trainable = layers_.size();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (!layers_[i].frozen) {
        lowest_trainable = i;
        break;
      }
    }

    Gradients grads;
    grads.layers.resize(layers_.size());
    Tensor2D grad = upstream;
    for (std::size_t li = layers_.size(); li-- > 0;) {
      if (!need_input_grad && li < lowest_trainable) break;
      const DenseLayer& layer = layers_[li];
      const LayerCache& lc = cache.layers[li];
      const std::size_t rows = grad.rows();
      const std::size_t width = grad.cols();

      const bool at_logits = at == GradientAt::logits && li + 1 == layers_.size();
      if (at_logits) {
        if (!lc.mask.empty()) throw ConfigError("logit gradients require an output layer without dropout");
      } else {
        if (!lc.mask.empty()) {
          auto g = grad.values();
          const auto m = lc.mask.values();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] *= m[i];
        }
        auto g = grad.values();
        const auto a = lc.activated.values();
        switch (layer.activation) {
          case Activation::identity: break;
          case Activation::relu:
            for (std::size_t i = 0; i < g.size(); ++i) {
              if (!(a[i] > 0.0)) g[i] = 0.0;
            }
            break;
          case Activation::sigmoid:
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= a[i] * (1.0 - a[i]);
            break;
        }
      }

      LayerGradients lg;
      if (layer.batch_norm) {
        const BatchNormState& bn = *layer.batch_norm;
        std::vector<double> dgamma(width, 0.0);
        std::vector<double> dbeta(width, 0.0);
        std::vector<double> sum_dxhat(width, 0.0);
        std::vector<double> sum_dxhat_xhat(width, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* g = grad.row(r).data();
          const double* xh = lc.normalized.row(r).data();
          for (std::size_t c = 0; c < width; ++c) {
            dgamma[c] += g[c] * xh[c];
            dbeta[c] += g[c];
            const double dxhat = g[c] * bn.gamma[c];
            sum_dxhat[c] += dxhat;
            sum_dxhat_xhat[c] += dxhat * xh[c];
          }
        }
        const double n = static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
          double* g = grad.row(r).data();
          const double* xh = lc.normalized.row(r).data();
          for (std::size_t c = 0; c < width; ++c) {
            const double dxhat = g[c] * bn.gamma[c];
            g[c] = lc.inv_std[c] / n * (n * dxhat - sum_dxhat[c] - xh[c] * sum_dxhat_xhat[c]);
          }
        }
        lg.gamma = std::move(dgamma);
        lg.beta = std::move(dbeta);
      }

      if (!layer.frozen) {
        lg.weights = matmul_transpose_lhs(lc.input, grad);
        lg.bias.assign(width, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* g = grad.row(r).data();
          for (std::size_t c = 0; c < width; ++c) lg.bias[c] += g[c];
        }
        grads.layers[li] = std::move(lg);
      }

      if (li > 0 || need_input_grad) grad = matmul(grad, layer.weights.transposed());
    }
    if (need_input_grad) grads.input = std::move(grad);
    return grads;
  }

  /// Folds the batch statistics recorded by a train-mode forward into the
  /// running batch-norm estimates.
  void commit_batch_stats(const ForwardCache& cache) {
    if (cache.mode != Mode::train || cache.layers.size() != layers_.size()) return;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      auto& layer = layers_[li];
      if (!layer.batch_norm || layer.frozen) continue;
      BatchNormState& bn = *layer.batch_norm;
      const LayerCache& lc = cache.layers[li];
      const double n = static_cast<double>(cache.batch_rows);
      const double unbias = n > 1.0 ? n / (n - 1.0) : 1.0;
      for (std::size_t c = 0; c < bn.width(); ++c) {
        bn.running_mean[c] = bn.momentum * bn.running_mean[c] + (1.0 - bn.momentum) * lc.batch_mean[c];
        bn.running_var[c] = bn.momentum * bn.running_var[c] + (1.0 - bn.momentum) * lc.batch_var[c] * unbias;
      }
    }
  }

 private:
  detail::InstanceId id_;
  std::uint64_t generation_ = 0;
  std::size_t input_width_ = 0;
  std::vector<DenseLayer> layers_;
};

}  // namespace prospect
