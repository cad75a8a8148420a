#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "prospect/data/csv.hpp"
#include "prospect/error.hpp"

namespace prospect {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

inline ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw ShapeError("prediction and label lengths differ");
  if (predictions.empty()) throw DataError("no predictions to evaluate");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predictions[i];
    const int y = labels[i];
    if ((p != 0 && p != 1) || (y != 0 && y != 1)) throw DataError("predictions and labels must be 0 or 1");
    if (p == 1) {
      (y == 1 ? c.tp : c.fp) += 1;
    } else {
      (y == 1 ? c.fn : c.tn) += 1;
    }
  }
  return c;
}

/// (1 + b^2) P R / (b^2 P + R); 0 when the denominator is 0.
inline double f_beta_score(double precision, double recall, double beta = 2.0, bool* degenerate = nullptr) {
  const double b2 = beta * beta;
  const double den = b2 * precision + recall;
  if (degenerate) *degenerate = den == 0.0;
  return den == 0.0 ? 0.0 : (1.0 + b2) * precision * recall / den;
}

/// Ratios with a zero denominator are reported as 0 and flagged.
struct MetricReport {
  ConfusionCounts counts;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_beta = 0.0;
  double beta = 2.0;
  bool precision_degenerate = false;
  bool recall_degenerate = false;
  bool f_beta_degenerate = false;

  bool degenerate() const noexcept { return precision_degenerate || recall_degenerate || f_beta_degenerate; }
};

inline MetricReport metrics_from_counts(const ConfusionCounts& c, double beta = 2.0) {
  if (c.total() == 0) throw DataError("no predictions to evaluate");
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  MetricReport m;
  m.counts = c;
  m.beta = beta;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  m.precision_degenerate = c.tp + c.fp == 0;
  m.recall_degenerate = c.tp + c.fn == 0;
  m.precision = m.precision_degenerate ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  m.recall = m.recall_degenerate ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  m.f_beta = f_beta_score(m.precision, m.recall, beta, &m.f_beta_degenerate);
  return m;
}

inline MetricReport compute_metrics(std::span<const int> predictions, std::span<const int> labels, double beta = 2.0) {
  return metrics_from_counts(confusion(predictions, labels), beta);
}

/// Area under the ROC curve (Mann-Whitney U), ties counted as one half.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("roc_auc: score and label lengths differ");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += avg_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) throw DataError("roc_auc needs both classes");
  const double p = static_cast<double>(positives);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

/// Indices sorted by descending probability, ties by ascending record id.
inline std::vector<std::size_t> rank_order(std::span<const double> probabilities, std::span<const std::string> record_ids) {
  if (probabilities.size() != record_ids.size()) throw ShapeError("rank: probability and id lengths differ");
  std::vector<std::size_t> order(probabilities.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (probabilities[a] != probabilities[b]) return probabilities[a] > probabilities[b];
    return record_ids[a] < record_ids[b];
  });
  return order;
}

inline std::vector<std::string> rank_universe(std::span<const double> probabilities,
                                              std::span<const std::string> record_ids) {
  std::vector<std::string> out;
  for (const auto i : rank_order(probabilities, record_ids)) out.push_back(record_ids[i]);
  return out;
}

/// Conversions per record id within one attribution window. Ids absent from
/// the table have zero conversions.
struct GroundTruth {
  std::unordered_map<std::string, long long> conversions;
  std::string attribution_window;

  long long of(const std::string& id) const {
    const auto it = conversions.find(id);
    return it == conversions.end() ? 0 : it->second;
  }

  long long total() const {
    long long s = 0;
    for (const auto& [id, c] : conversions) s += c;
    return s;
  }
};

/// CVR in hundredths of a percent, rounded half-up: 1043 / 309963 -> 34 (0.34%).
inline long long cvr_hundredths_percent(long long conversions, long long reach) {
  if (reach <= 0) throw ConfigError("reach must be positive");
  if (conversions < 0) throw DataError("conversions must be >= 0");
  const auto num = static_cast<unsigned __int128>(conversions) * 20000u + static_cast<unsigned __int128>(reach);
  return static_cast<long long>(num / (2u * static_cast<unsigned __int128>(reach)));
}

inline std::string format_hundredths_percent(long long hundredths) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%lld.%02lld%%", hundredths / 100, hundredths % 100);
  return buf;
}

struct CampaignReport {
  std::string model;
  long long reach = 0;
  long long converters = 0;
  long long conversions = 0;
  double cvr = 0.0;  // conversions / reach
  std::string attribution_window;
  std::vector<std::string> ranked_ids;  // the mailed ids, best first

  long long cvr_hundredths() const { return cvr_hundredths_percent(conversions, reach); }
  std::string cvr_text() const { return format_hundredths_percent(cvr_hundredths()); }
};

/// Mails the first `reach` ranked ids and counts their conversions.
inline CampaignReport simulate_campaign(std::span<const std::string> ranked_ids, long long reach, const GroundTruth& truth,
                                        std::string model = {}) {
  if (reach <= 0) throw ConfigError("reach must be positive");
  if (static_cast<std::size_t>(reach) > ranked_ids.size()) {
    throw ConfigError("reach " + std::to_string(reach) + " exceeds the ranked universe of " +
                      std::to_string(ranked_ids.size()));
  }
  CampaignReport r;
  r.model = std::move(model);
  r.reach = reach;
  r.attribution_window = truth.attribution_window;
  r.ranked_ids.assign(ranked_ids.begin(), ranked_ids.begin() + reach);
  for (const auto& id : r.ranked_ids) {
    const long long c = truth.of(id);
    if (c < 0) throw DataError("negative conversion count for '" + id + "'");
    r.conversions += c;
    r.converters += c > 0;
  }
  r.cvr = static_cast<double>(r.conversions) / static_cast<double>(reach);
  return r;
}

/// Ground truth CSV: record_id,conversions[,attribution_window].
inline GroundTruth parse_ground_truth(std::string_view text) {
  const auto t = CsvTable::parse(text);
  const auto id_col = t.column("record_id");
  const auto conv_col = t.column("conversions");
  const auto window_it = std::find(t.header.begin(), t.header.end(), "attribution_window");
  GroundTruth g;
  for (const auto& row : t.rows) {
    double v = 0.0;
    if (!parse_double(row.fields[conv_col], v) || v < 0 || v != std::floor(v)) {
      throw DataError("conversions must be a non-negative integer", row.line);
    }
    if (!g.conversions.emplace(row.fields[id_col], static_cast<long long>(v)).second) {
      throw DataError("duplicate record id '" + row.fields[id_col] + "'", row.line);
    }
    if (window_it != t.header.end()) g.attribution_window = row.fields[static_cast<std::size_t>(window_it - t.header.begin())];
  }
  return g;
}

inline std::string ground_truth_csv(std::span<const std::string> ids, std::span<const int> counts,
                                    const std::string& window) {
  if (ids.size() != counts.size()) throw ShapeError("ground truth id and count lengths differ");
  std::string out = "record_id,conversions,attribution_window\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += csv_escape(ids[i]) + "," + std::to_string(counts[i]) + "," + csv_escape(window) + "\n";
  }
  return out;
}

enum class Outcome { win, tie, loss };

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::win: return "win";
    case Outcome::tie: return "tie";
    case Outcome::loss: return "loss";
  }
  return "?";
}

struct Tally {
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t losses = 0;
  bool operator==(const Tally&) const = default;
};

inline Tally tally(std::span<const Outcome> outcomes) {
  Tally t;
  for (const auto o : outcomes) {
    (o == Outcome::win ? t.wins : o == Outcome::tie ? t.ties : t.losses) += 1;
  }
  return t;
}

/// Campaign outcome from the first model's point of view, compared at the
/// displayed two-decimal percent precision.
inline Outcome compare_cvr(const CampaignReport& a, const CampaignReport& b) {
  const auto x = a.cvr_hundredths();
  const auto y = b.cvr_hundredths();
  return x > y ? Outcome::win : x < y ? Outcome::loss : Outcome::tie;
}

inline constexpr double kMetricTieTolerance = 1e-4;

/// Metric outcome on F-beta; differences below 1e-4 (the 4-decimal display
/// precision) are ties.
inline Outcome compare_f_beta(const MetricReport& a, const MetricReport& b) {
  const double d = a.f_beta - b.f_beta;
  if (std::abs(d) < kMetricTieTolerance) return Outcome::tie;
  return d > 0 ? Outcome::win : Outcome::loss;
}

struct TaggedReport {
  std::string tag;      // model name, e.g. "DL-AE" or "RF"
  std::string run_key;  // pairs reports across models, e.g. seed or campaign id
  std::string dataset;  // identifies the universe / evaluation set
  std::variant<CampaignReport, MetricReport> report;
};

struct ComparisonRow {
  std::string run_key;
  std::string metric;
  double a = 0.0;
  double b = 0.0;
  double delta = 0.0;
  Outcome outcome = Outcome::tie;  // the run's outcome, repeated on each of its rows
};

struct ComparisonTable {
  std::string tag_a;
  std::string tag_b;
  std::vector<ComparisonRow> rows;
  std::vector<Outcome> outcomes;  // one per run key
  Tally tally;
};

/// Pairs the reports of `tag_a` and `tag_b` by run key and tallies tag_a's
/// wins, ties and losses. Paired reports must share a dataset and a kind.
inline ComparisonTable compare_models(std::span<const TaggedReport> reports, const std::string& tag_a,
                                      const std::string& tag_b) {
  if (reports.size() < 2) throw ConfigError("compare_models needs at least two reports");
  if (tag_a == tag_b) throw ConfigError("compare_models needs two distinct model tags");
  std::map<std::string, std::pair<const TaggedReport*, const TaggedReport*>> pairs;
  for (const auto& r : reports) {
    auto& slot = pairs[r.run_key];
    if (r.tag == tag_a || r.tag == tag_b) {
      auto& p = r.tag == tag_a ? slot.first : slot.second;
      if (p) throw DataError("duplicate report for '" + r.tag + "' in run '" + r.run_key + "'");
      p = &r;
    }
  }
  ComparisonTable t{tag_a, tag_b, {}, {}, {}};
  for (const auto& [key, p] : pairs) {
    if (!p.first || !p.second) throw DataError("run '" + key + "' lacks a report for both models");
    if (p.first->dataset != p.second->dataset) {
      throw DataError("run '" + key + "' compares different datasets ('" + p.first->dataset + "' vs '" +
                      p.second->dataset + "')");
    }
    if (p.first->report.index() != p.second->report.index()) throw DataError("run '" + key + "' mixes report kinds");
    const std::size_t first_row = t.rows.size();
    Outcome o;
    auto add = [&](const std::string& metric, double a, double b) { t.rows.push_back({key, metric, a, b, a - b, Outcome::tie}); };
    if (const auto* ca = std::get_if<CampaignReport>(&p.first->report)) {
      const auto& cb = std::get<CampaignReport>(p.second->report);
      add("reach", static_cast<double>(ca->reach), static_cast<double>(cb.reach));
      add("conversions", static_cast<double>(ca->conversions), static_cast<double>(cb.conversions));
      add("cvr", ca->cvr, cb.cvr);
      o = compare_cvr(*ca, cb);
    } else {
      const auto& a = std::get<MetricReport>(p.first->report);
      const auto& b = std::get<MetricReport>(p.second->report);
      add("accuracy", a.accuracy, b.accuracy);
      add("precision", a.precision, b.precision);
      add("recall", a.recall, b.recall);
      add("f_beta", a.f_beta, b.f_beta);
      o = compare_f_beta(a, b);
    }
    for (std::size_t i = first_row; i < t.rows.size(); ++i) t.rows[i].outcome = o;
    t.outcomes.push_back(o);
  }
  if (t.outcomes.empty()) throw DataError("no paired runs to compare");
  t.tally = tally(t.outcomes);
  return t;
}

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for one value
};

inline MeanStd mean_std(std::span<const double> v) {
  if (v.empty()) throw DataError("mean of an empty list");
  MeanStd m;
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (const double x : v) ss += (x - m.mean) * (x - m.mean);
    m.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

namespace detail {
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = (static_cast<double>(i + j) + 1.0) / 2.0;
    i = j;
  }
  return ranks;
}
}  // namespace detail

/// Spearman rank correlation (Pearson on average ranks).
inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ShapeError("spearman needs two equal-length series of length >= 2");
  const auto rx = detail::average_ranks(x);
  const auto ry = detail::average_ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

// Text and CSV renderings.

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string metric_report_text(const MetricReport& m) {
  std::ostringstream out;
  out << "tp: " << m.counts.tp << "\nfp: " << m.counts.fp << "\ntn: " << m.counts.tn << "\nfn: " << m.counts.fn
      << "\naccuracy: " << fixed(m.accuracy) << "\nprecision: " << fixed(m.precision) << "\nrecall: " << fixed(m.recall)
      << "\nf_beta: " << fixed(m.f_beta) << "\nbeta: " << format_double(m.beta)
      << "\ndegenerate: " << (m.degenerate() ? "true" : "false") << "\n";
  return out.str();
}

inline std::string metric_csv_header() { return "accuracy,precision,recall,f_beta,tp,fp,tn,fn,degenerate"; }

inline std::string metric_csv_row(const MetricReport& m) {
  return fixed(m.accuracy) + "," + fixed(m.precision) + "," + fixed(m.recall) + "," + fixed(m.f_beta) + "," +
         std::to_string(m.counts.tp) + "," + std::to_string(m.counts.fp) + "," + std::to_string(m.counts.tn) + "," +
         std::to_string(m.counts.fn) + "," + (m.degenerate() ? "1" : "0");
}

inline std::string ranked_csv(std::span<const double> probabilities, std::span<const std::string> record_ids) {
  std::string out = "rank,record_id,probability\n";
  std::size_t rank = 1;
  for (const auto i : rank_order(probabilities, record_ids)) {
    out += std::to_string(rank++) + "," + csv_escape(record_ids[i]) + "," + format_double(probabilities[i]) + "\n";
  }
  return out;
}

inline std::string campaign_csv(std::span<const CampaignReport> reports, const std::string& audience) {
  std::string out = "method,audience,reach,converters,conversions,cvr,attribution_window\n";
  for (const auto& r : reports) {
    out += csv_escape(r.model) + "," + csv_escape(audience) + "," + std::to_string(r.reach) + "," +
           std::to_string(r.converters) + "," + std::to_string(r.conversions) + "," + r.cvr_text() + "," +
           csv_escape(r.attribution_window) + "\n";
  }
  return out;
}

inline std::string campaign_summary(std::span<const CampaignReport> reports, const std::string& audience) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-10s %-10s %12s %8s %8s\n", "Method", "Audience", "Reach", "#CNV", "CVR");
  out << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%-10s %-10s %12lld %8lld %8s\n", r.model.c_str(), audience.c_str(), r.reach,
                  r.conversions, r.cvr_text().c_str());
    out << line;
  }
  return out.str();
}

inline std::string comparison_csv(const ComparisonTable& t) {
  std::string out = "run,metric," + csv_escape(t.tag_a) + "," + csv_escape(t.tag_b) + ",delta,outcome\n";
  for (const auto& r : t.rows) {
    out += csv_escape(r.run_key) + "," + r.metric + "," + format_double(r.a) + "," + format_double(r.b) + "," +
           format_double(r.delta) + "," + to_string(r.outcome) + "\n";
  }
  out += "total,tally,wins=" + std::to_string(t.tally.wins) + ",ties=" + std::to_string(t.tally.ties) +
         ",losses=" + std::to_string(t.tally.losses) + ",\n";
  return out;
}

}  // namespace prospect
