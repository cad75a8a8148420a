#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "prospect/autoencoder.hpp"
#include "prospect/data/dataset.hpp"
#include "prospect/error.hpp"
#include "prospect/io.hpp"
#include "prospect/nn/loss.hpp"
#include "prospect/nn/network.hpp"
#include "prospect/nn/optimizer.hpp"
#include "prospect/nn/serialize.hpp"

namespace prospect {

/// Hidden-layer plans: A512 = 512..64 by halving, A2048 = 2048..64 by
/// halving, A4096 = 4096 then 64. `custom` takes explicit widths.
enum class Architecture : std::uint8_t { a512 = 0, a2048 = 1, a4096 = 2, custom = 3 };

inline std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::a512: return "A512";
    case Architecture::a2048: return "A2048";
    case Architecture::a4096: return "A4096";
    case Architecture::custom: return "custom";
  }
  return "?";
}

inline Architecture parse_architecture(std::string_view s) {
  if (s == "A512") return Architecture::a512;
  if (s == "A2048") return Architecture::a2048;
  if (s == "A4096") return Architecture::a4096;
  if (s == "custom") return Architecture::custom;
  throw ConfigError("unknown architecture '" + std::string(s) + "' (A512, A2048, A4096, custom)");
}

inline std::vector<std::size_t> hidden_widths(Architecture a, std::span<const std::size_t> custom = {}) {
  auto halving = [](std::size_t from) {
    std::vector<std::size_t> out;
    for (std::size_t w = from; w >= 64; w /= 2) out.push_back(w);
    return out;
  };
  switch (a) {
    case Architecture::a512: return halving(512);
    case Architecture::a2048: return halving(2048);
    case Architecture::a4096: return {4096, 64};
    case Architecture::custom:
      if (custom.empty()) throw ConfigError("custom architecture needs hidden widths");
      return {custom.begin(), custom.end()};
  }
  return {};
}

inline constexpr double kDefaultThreshold = 0.5;

struct TrainConfig {
  OptimizerConfig optimizer;  // sgd_momentum, lr 1e-4, momentum 0.92
  std::size_t batch_size = 256;
  std::size_t epochs = 100;
  std::optional<ClassWeights> class_weights;  // inverse class frequency of the training labels when unset
  Architecture architecture = Architecture::a4096;
  std::vector<std::size_t> custom_hidden;
  double dropout_p = 0.5;
  bool batch_norm = true;
  std::uint64_t seed = 1;

  void validate() const {
    optimizer.validate();
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout_p must be in [0,1)");
    if (class_weights) class_weights->validate();
    (void)hidden_widths(architecture, custom_hidden);
  }
};

/// Frozen encoder plus the feed-forward network over z = [x, encode(x)].
class ClassifierModel {
 public:
  ClassifierModel() = default;
  ClassifierModel(AutoencoderModel encoder, Network ffn, Architecture architecture)
      : encoder_(std::move(encoder)), ffn_(std::move(ffn)), architecture_(architecture) {
    if (!encoder_.frozen()) throw ConfigError("classifier requires a frozen encoder");
    if (ffn_.input_width() != encoder_.input_width() + encoder_.encoded_size()) {
      throw ShapeError("ffn input width must equal d + encoded_size");
    }
    if (ffn_.output_width() != 1) throw ShapeError("ffn must end in a single unit");
  }

  const AutoencoderModel& encoder() const noexcept { return encoder_; }
  const Network& ffn() const noexcept { return ffn_; }
  Network& mutable_ffn() noexcept { return ffn_; }
  Architecture architecture() const noexcept { return architecture_; }
  std::size_t input_width() const noexcept { return encoder_.input_width(); }

  /// z = [x, x_e].
  Tensor2D assemble(const Tensor2D& x) const { return hconcat(x, encode_batch(encoder_, x)); }

 private:
  AutoencoderModel encoder_;
  Network ffn_;
  Architecture architecture_ = Architecture::a4096;
};

/// Eval-mode probabilities, clamped to [eps, 1 - eps].
inline std::vector<double> predict_proba(const ClassifierModel& model, const Tensor2D& x) {
  if (x.cols() != model.input_width()) {
    throw ShapeError("predict_proba: input has " + std::to_string(x.cols()) + " columns, model expects " +
                     std::to_string(model.input_width()));
  }
  const Tensor2D out = model.ffn().predict(model.assemble(x));
  std::vector<double> p(out.rows());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::clamp(out(i, 0), kProbabilityClamp, 1.0 - kProbabilityClamp);
  return p;
}

inline std::vector<int> classify(std::span<const double> probabilities, double threshold = kDefaultThreshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must be in (0,1)");
  std::vector<int> out(probabilities.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = probabilities[i] >= threshold ? 1 : 0;
  return out;
}

inline std::vector<int> classify(const ClassifierModel& model, const Tensor2D& x, double threshold = kDefaultThreshold) {
  return classify(predict_proba(model, x), threshold);
}

struct ClassifierTrainResult {
  ClassifierModel model;
  std::vector<double> loss_trace;  // mean weighted BCE per epoch
};

inline ClassWeights inverse_frequency_weights(std::span<const int> labels) {
  std::vector<Split> all(labels.size(), Split::train);
  return inverse_frequency_weights(labels, all);
}

/// Minibatch training of the ffn on weighted BCE. The encoder must already be
/// frozen; its output is computed once and never receives gradients.
inline ClassifierTrainResult train_classifier(const Tensor2D& x, std::span<const int> labels,
                                              const AutoencoderModel& encoder, const TrainConfig& cfg) {
  cfg.validate();
  if (!encoder.frozen()) throw ConfigError("train_classifier: encoder must be frozen before training");
  if (x.rows() != labels.size()) throw ShapeError("train_classifier: feature and label counts differ");
  if (x.cols() != encoder.input_width()) throw ShapeError("train_classifier: feature width does not match encoder");
  std::size_t positives = 0;
  for (const int y : labels) {
    if (y != 0 && y != 1) throw DataError("train_classifier: label must be 0 or 1");
    positives += static_cast<std::size_t>(y);
  }
  if (positives == 0 || positives == labels.size()) {
    throw DataError("train_classifier: training data must contain both classes");
  }
  const ClassWeights weights = cfg.class_weights ? *cfg.class_weights : inverse_frequency_weights(labels);

  Rng rng(derive_seed(cfg.seed, streams::classifier));
  std::vector<LayerSpec> specs;
  for (const auto w : hidden_widths(cfg.architecture, cfg.custom_hidden)) {
    specs.push_back({w, Activation::relu, cfg.batch_norm, cfg.dropout_p});
  }
  specs.push_back({1, Activation::sigmoid});
  ClassifierTrainResult res;
  res.model = ClassifierModel(encoder, Network(x.cols() + encoder.encoded_size(), specs, rng), cfg.architecture);
  Network& ffn = res.model.mutable_ffn();
  const Tensor2D z = res.model.assemble(x);
  Optimizer opt(cfg.optimizer);

  std::vector<std::size_t> order(z.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<int> batch_labels;
  std::vector<double> p;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t start = 0;
    while (start < order.size()) {
      std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      if (order.size() - stop == 1) ++stop;  // never leave a single-row batch for batch norm
      const auto idx = std::span<const std::size_t>(order).subspan(start, stop - start);
      const Tensor2D batch = z.select_rows(idx);
      batch_labels.clear();
      for (const auto i : idx) batch_labels.push_back(labels[i]);

      auto fwd = ffn.forward(batch, Mode::train, &rng);
      p.assign(fwd.output.values().begin(), fwd.output.values().end());
      const auto loss = weighted_bce_loss(p, batch_labels, weights);
      if (!std::isfinite(loss.loss)) {
        throw NonFiniteError("classifier: non-finite loss at epoch " + std::to_string(epoch + 1));
      }
      total += loss.loss * static_cast<double>(idx.size());
      Tensor2D upstream(idx.size(), 1);
      std::copy(loss.grad_logits.begin(), loss.grad_logits.end(), upstream.values().begin());
      const auto grads = ffn.backward(fwd.cache, upstream, GradientAt::logits);
      ffn.commit_batch_stats(fwd.cache);
      apply_gradients(ffn, grads, opt);
      start = stop;
    }
    res.loss_trace.push_back(total / static_cast<double>(order.size()));
  }
  return res;
}

/// Trains on the dataset's train split with the dataset's class weights
/// unless cfg overrides them.
inline ClassifierTrainResult train_classifier(const LabeledDataset& ds, const AutoencoderModel& encoder, TrainConfig cfg) {
  if (ds.features.empty()) throw ConfigError("train_classifier: dataset is not encoded");
  if (!cfg.class_weights) cfg.class_weights = ds.class_weights;
  const auto labels = ds.labels_of(Split::train);
  return train_classifier(ds.features_of(Split::train), labels, encoder, cfg);
}

// Container: "PKCL" | u16 version | u8 architecture | encoder-only PKAE | ffn PKNN
inline constexpr std::uint16_t kClassifierFormatVersion = 1;

inline void write_classifier(ByteWriter& w, const ClassifierModel& model) {
  w.bytes("PKCL");
  w.u16(kClassifierFormatVersion);
  w.u8(static_cast<std::uint8_t>(model.architecture()));
  write_autoencoder(w, model.encoder(), false);
  write_network(w, model.ffn(), StackRole::classifier);
}

inline ClassifierModel read_classifier(ByteReader& r) {
  r.expect_magic("PKCL");
  if (r.u16() != kClassifierFormatVersion) throw FormatError("unsupported classifier version");
  const std::uint8_t arch = r.u8();
  if (arch > static_cast<std::uint8_t>(Architecture::custom)) throw FormatError("bad architecture id");
  auto encoder = read_autoencoder(r);
  auto [ffn, role] = read_network(r);
  if (role != StackRole::classifier) throw FormatError("expected a classifier stack");
  try {
    return ClassifierModel(std::move(encoder), std::move(ffn), static_cast<Architecture>(arch));
  } catch (const Error& e) {
    throw FormatError(e.what());
  }
}

}  // namespace prospect
