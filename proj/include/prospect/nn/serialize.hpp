#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "prospect/error.hpp"
#include "prospect/io.hpp"
#include "prospect/nn/network.hpp"

namespace prospect {

// Layer-stack container:
//   "PKNN" | u16 version | u8 role | u32 input width | u32 layer count
//   per layer: u32 width | u8 activation | u8 batch-norm flag | f32 dropout p
//              | f32 bn momentum | f32 bn epsilon | u8 frozen
//   per layer, in declaration order: weights (in*out, row-major), bias,
//   and with batch norm gamma, beta, running mean, running var.
// Every parameter block is IEEE-754 binary32, little-endian.

inline constexpr char kNetworkMagic[] = "PKNN";
inline constexpr std::uint16_t kNetworkFormatVersion = 1;

enum class StackRole : std::uint8_t { generic = 0, encoder = 1, decoder = 2, classifier = 3 };

namespace detail {
inline void put_block(ByteWriter& w, std::span<const double> v) {
  for (const double x : v) w.f32(static_cast<float>(x));
}
inline void get_block(ByteReader& r, std::span<double> v) {
  for (double& x : v) x = static_cast<double>(r.f32());
}
}  // namespace detail

inline void write_network(ByteWriter& w, const Network& net, StackRole role) {
  w.bytes(std::string_view(kNetworkMagic, 4));
  w.u16(kNetworkFormatVersion);
  w.u8(static_cast<std::uint8_t>(role));
  w.u32(static_cast<std::uint32_t>(net.input_width()));
  w.u32(static_cast<std::uint32_t>(net.depth()));
  for (const auto& l : net.layers()) {
    w.u32(static_cast<std::uint32_t>(l.out_width()));
    w.u8(static_cast<std::uint8_t>(l.activation));
    w.u8(l.batch_norm ? 1 : 0);
    w.f32(static_cast<float>(l.dropout_p));
    w.f32(l.batch_norm ? static_cast<float>(l.batch_norm->momentum) : 0.0f);
    w.f32(l.batch_norm ? static_cast<float>(l.batch_norm->epsilon) : 0.0f);
    w.u8(l.frozen ? 1 : 0);
  }
  for (const auto& l : net.layers()) {
    detail::put_block(w, l.weights.values());
    detail::put_block(w, l.bias);
    if (l.batch_norm) {
      detail::put_block(w, l.batch_norm->gamma);
      detail::put_block(w, l.batch_norm->beta);
      detail::put_block(w, l.batch_norm->running_mean);
      detail::put_block(w, l.batch_norm->running_var);
    }
  }
}

inline std::pair<Network, StackRole> read_network(ByteReader& r) {
  r.expect_magic(std::string_view(kNetworkMagic, 4));
  const auto version = r.u16();
  if (version != kNetworkFormatVersion) {
    throw FormatError("unsupported layer-stack format version " + std::to_string(version));
  }
  const auto role = static_cast<StackRole>(r.u8());
  const std::size_t input_width = r.u32();
  const std::size_t depth = r.u32();
  std::vector<DenseLayer> layers(depth);
  std::size_t fan_in = input_width;
  for (auto& l : layers) {
    const std::size_t width = r.u32();
    const auto act = r.u8();
    if (act > static_cast<std::uint8_t>(Activation::sigmoid)) throw FormatError("unknown activation id");
    l.activation = static_cast<Activation>(act);
    const bool bn = r.u8() != 0;
    l.dropout_p = static_cast<double>(r.f32());
    const double momentum = static_cast<double>(r.f32());
    const double epsilon = static_cast<double>(r.f32());
    l.frozen = r.u8() != 0;
    l.weights = Tensor2D(fan_in, width);
    l.bias.assign(width, 0.0);
    if (bn) {
      l.batch_norm = BatchNormState(width);
      l.batch_norm->momentum = momentum;
      l.batch_norm->epsilon = epsilon;
    }
    fan_in = width;
  }
  for (auto& l : layers) {
    detail::get_block(r, l.weights.values());
    detail::get_block(r, l.bias);
    if (l.batch_norm) {
      detail::get_block(r, l.batch_norm->gamma);
      detail::get_block(r, l.batch_norm->beta);
      detail::get_block(r, l.batch_norm->running_mean);
      detail::get_block(r, l.batch_norm->running_var);
    }
  }
  return {Network(input_width, std::move(layers)), role};
}

}  // namespace prospect
