#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "prospect/error.hpp"
#include "prospect/io.hpp"
#include "prospect/nn/loss.hpp"
#include "prospect/nn/network.hpp"
#include "prospect/nn/optimizer.hpp"
#include "prospect/nn/serialize.hpp"
#include "prospect/random.hpp"

namespace prospect {

inline constexpr std::size_t kDefaultEncodedSize = 32;
inline constexpr std::size_t kDefaultFirstWidth = 256;
inline constexpr std::size_t kCandidateEncodedSizes[] = {16, 32, 64, 128};

struct AutoencoderConfig {
  std::size_t encoded_size = kDefaultEncodedSize;
  std::size_t first_width = kDefaultFirstWidth;  // first encoder layer, halved until encoded_size
  std::size_t epochs = 100;
  std::size_t batch_size = 256;
  OptimizerConfig optimizer = OptimizerConfig::adam();
  std::size_t max_rows = 0;  // 0 = train on every row, else a seeded subsample
  std::uint64_t seed = 1;

  void validate() const {
    if (encoded_size == 0) throw ConfigError("encoded_size must be positive");
    if (first_width == 0) throw ConfigError("first_width must be positive");
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    optimizer.validate();
  }
};

/// Output widths of the encoder layers: first_width, first_width/2, ... while
/// larger than encoded_size, then encoded_size. {256, 128, 64, 32} by default.
inline std::vector<std::size_t> encoder_widths(std::size_t encoded_size, std::size_t first_width = kDefaultFirstWidth) {
  std::vector<std::size_t> out;
  for (std::size_t w = first_width; w > encoded_size; w /= 2) out.push_back(w);
  out.push_back(encoded_size);
  return out;
}

/// Output widths of the decoder layers: the encoder widths reversed, ending
/// at the input width d.
inline std::vector<std::size_t> decoder_widths(std::size_t input_width, std::size_t encoded_size,
                                               std::size_t first_width = kDefaultFirstWidth) {
  auto enc = encoder_widths(encoded_size, first_width);
  std::vector<std::size_t> out(enc.rbegin() + 1, enc.rend());
  out.push_back(input_width);
  return out;
}

/// Encoder f_e and decoder f_d. Hidden layers are ReLU; the code layer and the
/// reconstruction layer are linear.
class AutoencoderModel {
 public:
  AutoencoderModel() = default;
  AutoencoderModel(Network encoder, Network decoder) : encoder_(std::move(encoder)), decoder_(std::move(decoder)) {
    if (!decoder_.layers().empty() &&
        (decoder_.input_width() != encoder_.output_width() || decoder_.output_width() != encoder_.input_width())) {
      throw ShapeError("decoder does not mirror encoder");
    }
  }

  AutoencoderModel(std::size_t input_width, std::size_t encoded_size, std::size_t first_width, Rng& rng) {
    if (input_width < encoded_size) {
      throw ConfigError("input width " + std::to_string(input_width) + " is smaller than encoded_size " +
                        std::to_string(encoded_size));
    }
    auto specs = [](const std::vector<std::size_t>& widths) {
      std::vector<LayerSpec> out;
      for (std::size_t i = 0; i < widths.size(); ++i) {
        out.push_back({widths[i], i + 1 == widths.size() ? Activation::identity : Activation::relu});
      }
      return out;
    };
    const auto enc = specs(encoder_widths(encoded_size, first_width));
    const auto dec = specs(decoder_widths(input_width, encoded_size, first_width));
    encoder_ = Network(input_width, enc, rng);
    decoder_ = Network(encoded_size, dec, rng);
  }

  std::size_t input_width() const noexcept { return encoder_.input_width(); }
  std::size_t encoded_size() const noexcept { return encoder_.output_width(); }
  bool has_decoder() const noexcept { return !decoder_.layers().empty(); }

  const Network& encoder() const noexcept { return encoder_; }
  const Network& decoder() const noexcept { return decoder_; }
  Network& mutable_encoder() noexcept { return encoder_; }
  Network& mutable_decoder() noexcept { return decoder_; }

  /// Freezing is idempotent; a frozen encoder receives no gradient updates.
  void freeze() noexcept { encoder_.freeze(); }
  bool frozen() const noexcept { return encoder_.frozen(); }

  Tensor2D encode(const Tensor2D& x) const { return encoder_.predict(x); }

  Tensor2D reconstruct(const Tensor2D& x) const {
    if (!has_decoder()) throw ConfigError("model was exported without its decoder");
    return decoder_.predict(encoder_.predict(x));
  }

 private:
  Network encoder_;
  Network decoder_;
};

inline Tensor2D encode_batch(const AutoencoderModel& model, const Tensor2D& x) {
  if (x.cols() != model.input_width()) {
    throw ShapeError("encode_batch: input has " + std::to_string(x.cols()) + " columns, encoder expects " +
                     std::to_string(model.input_width()));
  }
  return model.encode(x);
}

inline AutoencoderModel& freeze(AutoencoderModel& model) noexcept {
  model.freeze();
  return model;
}

struct AutoencoderTrainResult {
  AutoencoderModel model;
  std::vector<double> loss_trace;  // mean reconstruction loss per epoch
};

/// Trailing moving average with the given window (shorter at the start).
inline std::vector<double> moving_average(std::span<const double> trace, std::size_t window) {
  std::vector<double> out;
  double sum = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    sum += trace[i];
    if (i >= window) sum -= trace[i - window];
    out.push_back(sum / static_cast<double>(std::min(i + 1, window)));
  }
  return out;
}

namespace detail {
inline std::vector<std::size_t> subsample_rows(std::size_t rows, std::size_t max_rows, std::uint64_t seed) {
  std::vector<std::size_t> idx(rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (max_rows == 0 || rows <= max_rows) return idx;
  Rng rng(seed);
  for (std::size_t i = 0; i < max_rows; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, rows - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(max_rows);
  std::sort(idx.begin(), idx.end());
  return idx;
}
}  // namespace detail

/// Minibatch training on the mean squared reconstruction error. The model is
/// returned unfrozen.
inline AutoencoderTrainResult train_autoencoder(const Tensor2D& features, const AutoencoderConfig& cfg) {
  cfg.validate();
  if (features.rows() == 0) throw DataError("train_autoencoder: no rows");
  require_finite(features, "autoencoder input");
  const auto rows = detail::subsample_rows(features.rows(), cfg.max_rows, derive_seed(cfg.seed, 7));
  const Tensor2D x = rows.size() == features.rows() ? features : features.select_rows(rows);

  Rng rng(derive_seed(cfg.seed, streams::autoencoder));
  AutoencoderTrainResult res;
  res.model = AutoencoderModel(x.cols(), cfg.encoded_size, cfg.first_width, rng);
  Network& enc = res.model.mutable_encoder();
  Network& dec = res.model.mutable_decoder();
  Optimizer enc_opt(cfg.optimizer);
  Optimizer dec_opt(cfg.optimizer);

  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const Tensor2D batch = x.select_rows(std::span<const std::size_t>(order).subspan(start, stop - start));
      auto e = enc.forward(batch, Mode::train, &rng);
      auto d = dec.forward(e.output, Mode::train, &rng);
      const auto loss = mse_reconstruction_loss(batch, d.output);
      if (!std::isfinite(loss.loss)) {
        throw NonFiniteError("autoencoder: non-finite loss at epoch " + std::to_string(epoch + 1));
      }
      total += loss.loss * static_cast<double>(stop - start);
      const auto dec_grads = dec.backward(d.cache, loss.grad, GradientAt::output, true);
      const auto enc_grads = enc.backward(e.cache, dec_grads.input);
      apply_gradients(dec, dec_grads, dec_opt);
      apply_gradients(enc, enc_grads, enc_opt);
    }
    res.loss_trace.push_back(total / static_cast<double>(order.size()));
  }
  return res;
}

// Container: "PKAE" | u16 version | u8 has_decoder | encoder PKNN | [decoder PKNN]
inline constexpr std::uint16_t kAutoencoderFormatVersion = 1;

inline void write_autoencoder(ByteWriter& w, const AutoencoderModel& model, bool include_decoder = true) {
  w.bytes("PKAE");
  w.u16(kAutoencoderFormatVersion);
  const bool dec = include_decoder && model.has_decoder();
  w.u8(dec ? 1 : 0);
  write_network(w, model.encoder(), StackRole::encoder);
  if (dec) write_network(w, model.decoder(), StackRole::decoder);
}

inline AutoencoderModel read_autoencoder(ByteReader& r) {
  r.expect_magic("PKAE");
  if (r.u16() != kAutoencoderFormatVersion) throw FormatError("unsupported autoencoder version");
  const std::uint8_t has_decoder = r.u8();
  if (has_decoder > 1) throw FormatError("bad decoder flag");
  auto [enc, enc_role] = read_network(r);
  if (enc_role != StackRole::encoder) throw FormatError("expected an encoder stack");
  Network dec;
  if (has_decoder) {
    auto [d, dec_role] = read_network(r);
    if (dec_role != StackRole::decoder) throw FormatError("expected a decoder stack");
    dec = std::move(d);
  }
  try {
    return AutoencoderModel(std::move(enc), std::move(dec));
  } catch (const ShapeError& e) {
    throw FormatError(e.what());
  }
}

}  // namespace prospect
