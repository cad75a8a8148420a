#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "prospect/data/csv.hpp"
#include "prospect/data/schema.hpp"
#include "prospect/error.hpp"
#include "prospect/io.hpp"
#include "prospect/nn/tensor.hpp"

namespace prospect {

struct ColumnStats {
  double mean = 0.0;
  double stddev = 1.0;
  bool operator==(const ColumnStats&) const = default;
};

/// Standardization statistics fitted on a training set; one entry per schema
/// column (entries for categorical columns are unused).
struct EncodingStats {
  std::uint64_t schema_fingerprint = 0;
  std::vector<ColumnStats> columns;

  bool operator==(const EncodingStats&) const = default;
};

struct EncodeResult {
  Tensor2D features;
  EncodingStats stats;
};

namespace detail {
inline std::size_t hash_bucket(std::string_view token, std::size_t buckets) {
  return static_cast<std::size_t>(fnv1a64(token) % buckets);
}
}  // namespace detail

/// Fits per-column mean and population standard deviation over non-missing
/// values. A standard deviation below 1e-12 is replaced by 1.
inline EncodingStats fit_encoding(std::span<const RawRecord> records, const FeatureSchema& schema) {
  EncodingStats stats;
  stats.schema_fingerprint = schema.fingerprint();
  stats.columns.resize(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (schema.columns()[c].kind != ColumnKind::numeric) continue;
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& rec : records) {
      if (const auto* v = std::get_if<double>(&rec.values[c])) {
        sum += *v;
        ++n;
      }
    }
    if (n == 0) continue;
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& rec : records) {
      if (const auto* v = std::get_if<double>(&rec.values[c])) ss += (*v - mean) * (*v - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    stats.columns[c] = {mean, sd < 1e-12 ? 1.0 : sd};
  }
  return stats;
}

/// Encodes records into a (rows x schema.encoded_width()) matrix.
///
/// Numeric: z-score, then a missing indicator column when nullable (missing
/// values encode as 0 with indicator 1). One-hot categorical: one column per
/// vocabulary entry plus a trailing missing slot when nullable. Hashed
/// categorical: FNV-1a of the token modulo the bucket count; a missing value is
/// hashed as the empty token.
inline EncodeResult encode(std::span<const RawRecord> records, const FeatureSchema& schema,
                           const EncodingStats* stats = nullptr) {
  EncodeResult out;
  if (stats) {
    if (stats->schema_fingerprint != schema.fingerprint() || stats->columns.size() != schema.size()) {
      throw ConfigError("encoding statistics were fitted for a different schema");
    }
    out.stats = *stats;
  } else {
    out.stats = fit_encoding(records, schema);
  }

  const std::size_t width = schema.encoded_width();
  out.features = Tensor2D(records.size(), width);
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.values.size() != schema.size()) {
      throw DataError("record '" + rec.id + "' has " + std::to_string(rec.values.size()) + " values, schema has " +
                      std::to_string(schema.size()));
    }
    auto row = out.features.row(r);
    std::size_t offset = 0;
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const auto& spec = schema.columns()[c];
      const auto& value = rec.values[c];
      if (spec.kind == ColumnKind::numeric) {
        if (const auto* v = std::get_if<double>(&value)) {
          const auto& s = out.stats.columns[c];
          row[offset] = (*v - s.mean) / s.stddev;
        } else if (is_missing(value)) {
          if (!spec.nullable) throw DataError("record '" + rec.id + "': missing value in '" + spec.name + "'");
          row[offset + 1] = 1.0;
        } else {
          throw DataError("record '" + rec.id + "': non-numeric value in '" + spec.name + "'");
        }
      } else {
        const std::string* token = std::get_if<std::string>(&value);
        if (!token && !is_missing(value)) {
          throw DataError("record '" + rec.id + "': numeric value in categorical '" + spec.name + "'");
        }
        if (spec.encoding() == CategoricalEncoding::hashed) {
          row[offset + detail::hash_bucket(token ? *token : std::string_view{}, spec.buckets())] = 1.0;
        } else if (!token) {
          if (!spec.nullable) throw DataError("record '" + rec.id + "': missing value in '" + spec.name + "'");
          row[offset + spec.vocabulary.size()] = 1.0;
        } else {
          const auto it = std::find(spec.vocabulary.begin(), spec.vocabulary.end(), *token);
          if (it == spec.vocabulary.end()) {
            throw DataError("record '" + rec.id + "': unknown category '" + *token + "' in '" + spec.name + "'");
          }
          row[offset + static_cast<std::size_t>(it - spec.vocabulary.begin())] = 1.0;
        }
      }
      offset += spec.encoded_width();
    }
  }
  return out;
}

inline void write_stats(ByteWriter& w, const EncodingStats& s) {
  w.u64(s.schema_fingerprint);
  w.u32(static_cast<std::uint32_t>(s.columns.size()));
  for (const auto& c : s.columns) {
    w.f64(c.mean);
    w.f64(c.stddev);
  }
}

inline EncodingStats read_stats(ByteReader& r) {
  EncodingStats s;
  s.schema_fingerprint = r.u64();
  s.columns.resize(r.u32());
  for (auto& c : s.columns) {
    c.mean = r.f64();
    c.stddev = r.f64();
  }
  return s;
}

}  // namespace prospect
