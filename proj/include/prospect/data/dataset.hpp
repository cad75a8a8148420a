#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "prospect/data/csv.hpp"
#include "prospect/data/encode.hpp"
#include "prospect/error.hpp"
#include "prospect/io.hpp"
#include "prospect/nn/loss.hpp"
#include "prospect/random.hpp"

namespace prospect {

enum class Split : std::uint8_t { train = 0, test = 1 };

/// Audience rows (label 1) plus sampled non-audience rows (label 0).
///
/// `records` keeps the raw rows so that encoding statistics can be fitted on
/// the train split after splitting; `features` stays empty until
/// encode_dataset() runs.
struct LabeledDataset {
  std::vector<RawRecord> records;
  Tensor2D features;
  std::vector<int> labels;
  std::vector<std::string> record_ids;
  ClassWeights class_weights;
  std::vector<Split> split;
  double ratio = 1.0;

  std::size_t size() const noexcept { return labels.size(); }

  std::vector<std::size_t> indices(Split which) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i) {
      if (split[i] == which) out.push_back(i);
    }
    return out;
  }

  std::size_t count(int label, Split which) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) n += labels[i] == label && split[i] == which;
    return n;
  }

  std::size_t count(int label) const { return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label)); }

  Tensor2D features_of(Split which) const {
    const auto idx = indices(which);
    return features.select_rows(idx);
  }

  std::vector<int> labels_of(Split which) const {
    std::vector<int> out;
    for (const auto i : indices(which)) out.push_back(labels[i]);
    return out;
  }

  void validate() const {
    const std::size_t n = labels.size();
    if (record_ids.size() != n || split.size() != n || (!records.empty() && records.size() != n) ||
        (!features.empty() && features.rows() != n)) {
      throw ShapeError("dataset field lengths disagree");
    }
  }
};

/// w_c = N_train / N_c over the train split.
inline ClassWeights inverse_frequency_weights(std::span<const int> labels, std::span<const Split> split) {
  std::size_t n0 = 0;
  std::size_t n1 = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (split[i] != Split::train) continue;
    (labels[i] == 1 ? n1 : n0) += 1;
  }
  if (n0 == 0 || n1 == 0) throw DataError("class weights need both classes in the train split");
  const double n = static_cast<double>(n0 + n1);
  return {n / static_cast<double>(n0), n / static_cast<double>(n1)};
}

/// Labels every audience record 1 and a uniform sample (without replacement)
/// of ratio * |audience| records from universe minus audience 0. Universe
/// records whose id appears in the audience are excluded before sampling.
inline LabeledDataset build_prospecting_dataset(std::span<const RawRecord> audience, std::span<const RawRecord> universe,
                                                long long ratio, std::uint64_t seed) {
  if (ratio < 1) throw ConfigError("ratio must be >= 1");
  if (audience.empty()) throw DataError("audience is empty");
  std::unordered_set<std::string> audience_ids;
  for (const auto& r : audience) audience_ids.insert(r.id);

  std::vector<std::size_t> eligible;
  eligible.reserve(universe.size());
  for (std::size_t i = 0; i < universe.size(); ++i) {
    if (!audience_ids.contains(universe[i].id)) eligible.push_back(i);
  }
  const std::size_t need = static_cast<std::size_t>(ratio) * audience.size();
  if (eligible.size() < need) {
    throw DataError("insufficient universe: need " + std::to_string(need) + " non-audience records, have " +
                    std::to_string(eligible.size()));
  }

  Rng rng(seed);
  for (std::size_t i = 0; i < need; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, eligible.size() - 1);
    std::swap(eligible[i], eligible[pick(rng)]);
  }

  LabeledDataset ds;
  ds.ratio = static_cast<double>(ratio);
  ds.records.reserve(audience.size() + need);
  for (const auto& r : audience) {
    ds.records.push_back(r);
    ds.labels.push_back(1);
  }
  for (std::size_t i = 0; i < need; ++i) {
    ds.records.push_back(universe[eligible[i]]);
    ds.labels.push_back(0);
  }
  for (const auto& r : ds.records) ds.record_ids.push_back(r.id);
  ds.split.assign(ds.size(), Split::train);
  ds.class_weights = inverse_frequency_weights(ds.labels, ds.split);
  return ds;
}

/// Stratified split: each class sends round(test_fraction * n_c) rows to test.
/// Class weights are recomputed on the resulting train split.
inline LabeledDataset split(LabeledDataset ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0,1)");
  ds.validate();
  Rng rng(seed);
  ds.split.assign(ds.size(), Split::train);
  for (const int label : {1, 0}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.labels[i] == label) idx.push_back(i);
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
    if (n_test >= idx.size()) {
      throw DataError("split would leave class " + std::to_string(label) + " with no train rows");
    }
    for (std::size_t k = 0; k < n_test; ++k) ds.split[idx[k]] = Split::test;
  }
  ds.class_weights = inverse_frequency_weights(ds.labels, ds.split);
  return ds;
}

/// Encodes ds.records into ds.features. Statistics are fitted on the train
/// split unless `stats` is given.
inline EncodingStats encode_dataset(LabeledDataset& ds, const FeatureSchema& schema,
                                    const EncodingStats* stats = nullptr) {
  ds.validate();
  EncodingStats fitted;
  if (stats == nullptr) {
    std::vector<RawRecord> train;
    for (const auto i : ds.indices(Split::train)) train.push_back(ds.records[i]);
    fitted = fit_encoding(train, schema);
    stats = &fitted;
  }
  auto res = encode(ds.records, schema, stats);
  ds.features = std::move(res.features);
  return res.stats;
}

// Dataset snapshot: "PKDS" | u16 version | u32 rows | u32 cols | f64 ratio
// | f64 w0 | f64 w1 | per row: str id, u8 label, u8 split | features as f32 LE.
inline constexpr std::uint16_t kSnapshotVersion = 1;

inline std::string snapshot_bytes(const LabeledDataset& ds) {
  ds.validate();
  ByteWriter w;
  w.bytes("PKDS");
  w.u16(kSnapshotVersion);
  w.u32(static_cast<std::uint32_t>(ds.size()));
  w.u32(static_cast<std::uint32_t>(ds.features.cols()));
  w.f64(ds.ratio);
  w.f64(ds.class_weights.w0);
  w.f64(ds.class_weights.w1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    w.str(ds.record_ids[i]);
    w.u8(static_cast<std::uint8_t>(ds.labels[i]));
    w.u8(static_cast<std::uint8_t>(ds.split[i]));
  }
  for (const double v : ds.features.values()) w.f32(static_cast<float>(v));
  return w.take();
}

inline LabeledDataset load_snapshot(std::string_view bytes) {
  ByteReader r(bytes);
  r.expect_magic("PKDS");
  if (r.u16() != kSnapshotVersion) throw FormatError("unsupported dataset snapshot version");
  const std::size_t rows = r.u32();
  const std::size_t cols = r.u32();
  LabeledDataset ds;
  ds.ratio = r.f64();
  ds.class_weights.w0 = r.f64();
  ds.class_weights.w1 = r.f64();
  for (std::size_t i = 0; i < rows; ++i) {
    ds.record_ids.push_back(r.str());
    ds.labels.push_back(r.u8());
    ds.split.push_back(static_cast<Split>(r.u8()));
  }
  ds.features = Tensor2D(rows, cols);
  for (double& v : ds.features.values()) v = static_cast<double>(r.f32());
  if (!r.done()) throw FormatError("trailing bytes in dataset snapshot");
  return ds;
}

}  // namespace prospect
