#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "prospect/error.hpp"
#include "prospect/io.hpp"
#include "prospect/random.hpp"

namespace prospect {

/// Categorical columns with at most this many categories are one-hot encoded;
/// larger vocabularies are hashed into kDefaultHashBuckets buckets.
inline constexpr std::size_t kOneHotLimit = 64;
inline constexpr std::size_t kDefaultHashBuckets = 64;

enum class ColumnKind { numeric, categorical };
enum class CategoricalEncoding { one_hot, hashed };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  bool nullable = false;
  std::vector<std::string> vocabulary;  // categorical, one-hot candidates
  std::size_t hash_buckets = 0;         // categorical without vocabulary

  CategoricalEncoding encoding() const noexcept {
    if (vocabulary.empty() || vocabulary.size() > kOneHotLimit) return CategoricalEncoding::hashed;
    return CategoricalEncoding::one_hot;
  }

  std::size_t buckets() const noexcept { return hash_buckets == 0 ? kDefaultHashBuckets : hash_buckets; }

  /// numeric: value [+ missing indicator]; one-hot: vocabulary [+ missing
  /// slot]; hashed: bucket count (missing hashes like any other token).
  std::size_t encoded_width() const noexcept {
    if (kind == ColumnKind::numeric) return nullable ? 2 : 1;
    if (encoding() == CategoricalEncoding::hashed) return buckets();
    return vocabulary.size() + (nullable ? 1 : 0);
  }

  bool operator==(const ColumnSpec&) const = default;
};

/// Column declarations shared by ingestion, encoding and every model.
///
/// Text grammar (one directive per line, '#' starts a comment):
///
///     schema_version: 1
///     id_column: <name>
///     column: <name> numeric [nullable]
///     column: <name> categorical [nullable] vocab=<tok>|<tok>|...
///     column: <name> categorical [nullable] buckets=<n>
///
/// Column order is the encoding order. Names may not contain whitespace.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  FeatureSchema(std::string id_column, std::vector<ColumnSpec> columns)
      : id_column_(std::move(id_column)), columns_(std::move(columns)) {
    validate();
  }

  const std::string& id_column() const noexcept { return id_column_; }
  const std::vector<ColumnSpec>& columns() const noexcept { return columns_; }
  std::size_t size() const noexcept { return columns_.size(); }

  std::size_t encoded_width() const noexcept {
    std::size_t w = 0;
    for (const auto& c : columns_) w += c.encoded_width();
    return w;
  }

  /// Index of a feature column, or size() when absent.
  std::size_t index_of(std::string_view name) const noexcept {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (columns_[i].name == name) return i;
    }
    return columns_.size();
  }

  void validate() const {
    if (id_column_.empty()) throw ConfigError("schema: id_column is required");
    std::set<std::string> seen{id_column_};
    for (const auto& c : columns_) {
      if (c.name.empty()) throw ConfigError("schema: empty column name");
      if (!seen.insert(c.name).second) throw ConfigError("schema: duplicate column name '" + c.name + "'");
      if (c.kind == ColumnKind::categorical) {
        std::set<std::string> vocab(c.vocabulary.begin(), c.vocabulary.end());
        if (vocab.size() != c.vocabulary.size()) throw ConfigError("schema: duplicate category in '" + c.name + "'");
        if (c.vocabulary.empty() && c.hash_buckets == 0) {
          throw ConfigError("schema: categorical column '" + c.name + "' needs vocab= or buckets=");
        }
      }
    }
  }

  std::string to_text() const {
    std::ostringstream out;
    out << "schema_version: 1\n";
    out << "id_column: " << id_column_ << "\n";
    for (const auto& c : columns_) {
      out << "column: " << c.name << (c.kind == ColumnKind::numeric ? " numeric" : " categorical");
      if (c.nullable) out << " nullable";
      if (c.kind == ColumnKind::categorical) {
        if (!c.vocabulary.empty()) {
          out << " vocab=";
          for (std::size_t i = 0; i < c.vocabulary.size(); ++i) out << (i ? "|" : "") << c.vocabulary[i];
        }
        if (c.hash_buckets != 0) out << " buckets=" << c.hash_buckets;
      }
      out << "\n";
    }
    return out.str();
  }

  static FeatureSchema parse(std::string_view text) {
    std::string id;
    std::vector<ColumnSpec> cols;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto colon = line.find(':');
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      if (colon == std::string::npos) throw DataError("schema: expected 'key: value'", line_no);
      const std::string key = trim(line.substr(0, colon));
      const std::string value = trim(line.substr(colon + 1));
      if (key == "schema_version") {
        if (value != "1") throw DataError("schema: unsupported schema_version " + value, line_no);
      } else if (key == "id_column") {
        id = value;
      } else if (key == "column") {
        cols.push_back(parse_column(value, line_no));
      } else {
        throw DataError("schema: unknown key '" + key + "'", line_no);
      }
    }
    return FeatureSchema(std::move(id), std::move(cols));
  }

  static FeatureSchema load(const std::filesystem::path& path) { return parse(read_file(path)); }

  std::uint64_t fingerprint() const { return fnv1a64(to_text()); }

  bool operator==(const FeatureSchema&) const = default;

 private:
  static std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
  }

  static ColumnSpec parse_column(const std::string& value, std::size_t line_no) {
    std::istringstream words(value);
    ColumnSpec c;
    std::string kind;
    if (!(words >> c.name >> kind)) throw DataError("schema: column needs a name and a kind", line_no);
    if (kind == "numeric") {
      c.kind = ColumnKind::numeric;
    } else if (kind == "categorical") {
      c.kind = ColumnKind::categorical;
    } else {
      throw DataError("schema: unknown column kind '" + kind + "'", line_no);
    }
    std::string word;
    while (words >> word) {
      if (word == "nullable") {
        c.nullable = true;
      } else if (c.kind == ColumnKind::categorical && word.rfind("vocab=", 0) == 0) {
        std::string_view rest = std::string_view(word).substr(6);
        while (!rest.empty()) {
          const auto bar = rest.find('|');
          c.vocabulary.emplace_back(rest.substr(0, bar));
          if (bar == std::string_view::npos) break;
          rest.remove_prefix(bar + 1);
        }
      } else if (c.kind == ColumnKind::categorical && word.rfind("buckets=", 0) == 0) {
        try {
          c.hash_buckets = std::stoul(word.substr(8));
        } catch (const std::exception&) {
          throw DataError("schema: bad bucket count '" + word + "'", line_no);
        }
        if (c.hash_buckets == 0) throw DataError("schema: bucket count must be positive", line_no);
      } else {
        throw DataError("schema: unexpected token '" + word + "'", line_no);
      }
    }
    return c;
  }

  std::string id_column_;
  std::vector<ColumnSpec> columns_;
};

}  // namespace prospect
