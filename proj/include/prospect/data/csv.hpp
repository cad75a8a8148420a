#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "prospect/data/schema.hpp"
#include "prospect/error.hpp"
#include "prospect/io.hpp"

namespace prospect {

/// A single cell: missing, a number, or a category token.
using RawValue = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const RawValue& v) noexcept { return std::holds_alternative<std::monostate>(v); }

/// One row of the audience or universe, values ordered as the schema columns.
struct RawRecord {
  std::string id;
  std::vector<RawValue> values;

  bool operator==(const RawRecord&) const = default;
};

struct CsvRow {
  std::size_t line = 0;  // 1-based line where the row starts
  std::vector<std::string> fields;
};

/// RFC 4180 reader: comma separated, double-quote quoting with "" escapes,
/// quoted fields may span lines, CRLF or LF line endings.
inline std::vector<CsvRow> parse_csv_rows(std::string_view text) {
  std::vector<CsvRow> rows;
  std::size_t line = 1;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    CsvRow row;
    row.line = line;
    std::string field;
    bool row_done = false;
    while (!row_done) {
      field.clear();
      if (i < n && text[i] == '"') {
        ++i;
        for (;;) {
          if (i >= n) throw DataError("unterminated quoted field", row.line);
          const char c = text[i++];
          if (c == '"') {
            if (i < n && text[i] == '"') {
              field.push_back('"');
              ++i;
            } else {
              break;
            }
          } else {
            if (c == '\n') ++line;
            field.push_back(c);
          }
        }
        if (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
          throw DataError("unexpected character after closing quote", line);
        }
      } else {
        while (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
          if (text[i] == '"') throw DataError("quote inside unquoted field", line);
          field.push_back(text[i++]);
        }
      }
      row.fields.push_back(field);
      if (i >= n) {
        row_done = true;
      } else if (text[i] == ',') {
        ++i;
      } else {
        if (text[i] == '\r') ++i;
        if (i < n && text[i] == '\n') ++i;
        ++line;
        row_done = true;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

/// Parses CSV text into records. The header must contain the id column and
/// every schema column exactly once, in any order. An empty cell is missing.
inline std::vector<RawRecord> parse_records(std::string_view text, const FeatureSchema& schema) {
  auto rows = parse_csv_rows(text);
  if (rows.empty()) throw DataError("missing header row", 1);
  const auto& header = rows.front().fields;
  std::size_t id_pos = header.size();
  std::vector<std::size_t> column_of_field(header.size(), schema.size());
  std::vector<bool> seen(schema.size(), false);
  for (std::size_t f = 0; f < header.size(); ++f) {
    if (header[f] == schema.id_column()) {
      if (id_pos != header.size()) throw DataError("duplicate column '" + header[f] + "'", 1);
      id_pos = f;
      continue;
    }
    const auto idx = schema.index_of(header[f]);
    if (idx == schema.size()) throw DataError("unknown column '" + header[f] + "'", 1);
    if (seen[idx]) throw DataError("duplicate column '" + header[f] + "'", 1);
    seen[idx] = true;
    column_of_field[f] = idx;
  }
  if (id_pos == header.size()) throw DataError("header lacks id column '" + schema.id_column() + "'", 1);
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (!seen[c]) throw DataError("header lacks column '" + schema.columns()[c].name + "'", 1);
  }

  std::vector<RawRecord> records;
  records.reserve(rows.size() - 1);
  std::unordered_set<std::string> ids;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() == 1 && row.fields[0].empty()) continue;  // blank line
    if (row.fields.size() != header.size()) {
      throw DataError("expected " + std::to_string(header.size()) + " fields, found " +
                          std::to_string(row.fields.size()),
                      row.line);
    }
    RawRecord rec;
    rec.id = row.fields[id_pos];
    if (rec.id.empty()) throw DataError("empty record id", row.line);
    if (!ids.insert(rec.id).second) throw DataError("duplicate record id '" + rec.id + "'", row.line);
    rec.values.resize(schema.size());
    for (std::size_t f = 0; f < header.size(); ++f) {
      if (f == id_pos) continue;
      const auto c = column_of_field[f];
      const auto& cell = row.fields[f];
      const auto& spec = schema.columns()[c];
      if (cell.empty()) {
        rec.values[c] = std::monostate{};
      } else if (spec.kind == ColumnKind::numeric) {
        double v = 0.0;
        if (!parse_double(cell, v)) {
          throw DataError("column '" + spec.name + "': not a finite number '" + cell + "'", row.line);
        }
        rec.values[c] = v;
      } else {
        rec.values[c] = cell;
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<RawRecord> load_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
  try {
    return parse_records(read_file(path), schema);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline std::string records_to_csv(std::span<const RawRecord> records, const FeatureSchema& schema) {
  std::string out = csv_escape(schema.id_column());
  for (const auto& c : schema.columns()) out += "," + csv_escape(c.name);
  out += "\n";
  for (const auto& rec : records) {
    out += csv_escape(rec.id);
    for (const auto& v : rec.values) {
      out += ",";
      if (const auto* d = std::get_if<double>(&v)) {
        out += format_double(*d);
      } else if (const auto* s = std::get_if<std::string>(&v)) {
        out += csv_escape(*s);
      }
    }
    out += "\n";
  }
  return out;
}

/// Header-indexed view of a generic CSV file (ground truth, reports).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw DataError("missing column '" + std::string(name) + "'", 1);
  }

  static CsvTable parse(std::string_view text) {
    CsvTable t;
    auto rows = parse_csv_rows(text);
    if (rows.empty()) throw DataError("missing header row", 1);
    t.header = std::move(rows.front().fields);
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].fields.size() == 1 && rows[r].fields[0].empty()) continue;
      if (rows[r].fields.size() != t.header.size()) {
        throw DataError("expected " + std::to_string(t.header.size()) + " fields", rows[r].line);
      }
      t.rows.push_back(std::move(rows[r]));
    }
    return t;
  }
};

}  // namespace prospect
