#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "prospect/data/csv.hpp"
#include "prospect/data/synthetic.hpp"
#include "prospect/eval.hpp"
#include "prospect/io.hpp"
#include "prospect/pipeline.hpp"

namespace prospect::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitFormat = 4;
inline constexpr int kExitNumeric = 5;

/// Collects artifacts for one run directory and writes the manifest last.
class OutputDir {
 public:
  OutputDir(fs::path root, bool force) : root_(std::move(root)) {
    if (root_.empty()) throw ConfigError("--out is required");
    if (fs::exists(root_) && !fs::is_directory(root_)) throw ConfigError(root_.string() + " is not a directory");
    if (fs::exists(root_) && !fs::is_empty(root_) && !force) {
      throw ConfigError("output directory " + root_.string() + " is not empty (use --force to overwrite)");
    }
    fs::create_directories(root_);
  }

  const fs::path& root() const noexcept { return root_; }

  void write(const std::string& relative, std::string_view contents) {
    write_file_atomic(root_ / relative, contents);
    artifacts_[relative] = hex64(fnv1a64(contents));
  }

  void finish(const std::string& command, json config) {
    json m;
    m["format"] = "prospect-manifest";
    m["version"] = 1;
    m["command"] = command;
    m["config"] = std::move(config);
    m["artifacts"] = json::object();
    for (const auto& [name, hash] : artifacts_) m["artifacts"][name] = "fnv1a64:" + hash;
    write_file_atomic(root_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  fs::path root_;
  std::map<std::string, std::string> artifacts_;
};

// synth

struct SynthOptions {
  SyntheticPopulationSpec spec;
  std::string attribution_window = "30d";
  std::string out;
  bool force = false;

  json to_json() const {
    return json{{"universe_size", spec.universe_size},
                {"audience_size", spec.audience_size},
                {"numeric_dims", spec.numeric_dims},
                {"categorical_cardinalities", spec.categorical_cardinalities},
                {"separation", spec.separation},
                {"lookalike_fraction", spec.lookalike_fraction},
                {"base_conversion_rate", spec.base_conversion_rate},
                {"propensity_slope", spec.propensity_slope},
                {"repeat_purchase_mean", spec.repeat_purchase_mean},
                {"seed", spec.seed},
                {"attribution_window", attribution_window}};
  }
};

/// Writes schema.txt, audience.csv, universe.csv and conversions.csv.
inline void cmd_synth(const SynthOptions& o, std::ostream& log) {
  o.spec.validate();
  OutputDir out(o.out, o.force);
  const auto pop = generate_synthetic(o.spec);
  const auto counts =
      sample_conversions(pop.propensity, o.spec.repeat_purchase_mean, derive_seed(o.spec.seed, streams::conversions));
  std::vector<std::string> ids;
  ids.reserve(pop.universe.size());
  for (const auto& r : pop.universe) ids.push_back(r.id);
  out.write("schema.txt", pop.schema.to_text());
  out.write("audience.csv", records_to_csv(pop.audience, pop.schema));
  out.write("universe.csv", records_to_csv(pop.universe, pop.schema));
  out.write("conversions.csv", ground_truth_csv(ids, counts, o.attribution_window));
  out.finish("synth", o.to_json());
  log << "wrote " << pop.audience.size() << " audience and " << pop.universe.size() << " universe records to "
      << o.out << "\n";
}

// train / sweep

struct TrainOptions {
  std::string data_dir;
  std::string schema_path;
  std::string audience_path;
  std::string universe_path;
  std::string model = "dl-ae";
  long long ratio = 4;
  double test_fraction = 0.2;
  double threshold = kDefaultThreshold;
  double beta = 2.0;

  std::size_t encoded_size = kDefaultEncodedSize;
  std::size_t ae_first_width = kDefaultFirstWidth;
  std::size_t ae_epochs = 100;
  std::size_t ae_batch = 256;
  std::size_t ae_max_rows = 0;
  double ae_lr = 1e-3;

  std::string architecture = "A4096";
  std::vector<std::size_t> hidden;
  std::string optimizer = "sgd";
  double lr = 1e-4;
  double momentum = 0.92;
  std::size_t batch = 256;
  std::size_t epochs = 100;
  double dropout = 0.5;
  bool no_batch_norm = false;
  double w0 = 0.0;  // 0 with w1 = 0: inverse class frequency
  double w1 = 0.0;

  std::size_t rf_trees = 300;
  std::size_t rf_depth = 12;
  double rf_min_samples = 5.0;
  std::size_t rf_features = 0;
  bool rf_no_bootstrap = false;
  bool rf_weighted = false;
  std::size_t rf_threads = 0;

  std::vector<std::uint64_t> seeds{1};
  std::string out;
  bool force = false;

  fs::path schema_file() const { return schema_path.empty() ? fs::path(data_dir) / "schema.txt" : fs::path(schema_path); }
  fs::path audience_file() const {
    return audience_path.empty() ? fs::path(data_dir) / "audience.csv" : fs::path(audience_path);
  }
  fs::path universe_file() const {
    return universe_path.empty() ? fs::path(data_dir) / "universe.csv" : fs::path(universe_path);
  }

  PipelineConfig pipeline() const {
    PipelineConfig c;
    c.ratio = ratio;
    c.test_fraction = test_fraction;
    c.threshold = threshold;
    c.beta = beta;
    c.model = parse_model_kind(model);
    c.autoencoder.encoded_size = encoded_size;
    c.autoencoder.first_width = ae_first_width;
    c.autoencoder.epochs = ae_epochs;
    c.autoencoder.batch_size = ae_batch;
    c.autoencoder.max_rows = ae_max_rows;
    c.autoencoder.optimizer = OptimizerConfig::adam(ae_lr);
    c.classifier.architecture = architecture == "custom" ? Architecture::custom : parse_architecture(architecture);
    c.classifier.custom_hidden = hidden;
    if (optimizer == "sgd") {
      c.classifier.optimizer.learning_rate = lr;
      c.classifier.optimizer.momentum = momentum;
    } else if (optimizer == "adam") {
      c.classifier.optimizer = OptimizerConfig::adam(lr);
    } else {
      throw ConfigError("unknown optimizer '" + optimizer + "' (expected sgd or adam)");
    }
    c.classifier.batch_size = batch;
    c.classifier.epochs = epochs;
    c.classifier.dropout_p = dropout;
    c.classifier.batch_norm = !no_batch_norm;
    if (w0 != 0.0 || w1 != 0.0) c.classifier.class_weights = ClassWeights{w0, w1};
    c.forest.n_trees = rf_trees;
    c.forest.max_depth = rf_depth;
    c.forest.min_samples = rf_min_samples;
    c.forest.features_per_split = rf_features;
    c.forest.bootstrap = !rf_no_bootstrap;
    c.forest.weighted_gini = rf_weighted;
    c.forest.threads = rf_threads;
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    c.validate();
    return c;
  }

  json to_json() const {
    return json{{"schema", schema_file().string()},
                {"audience", audience_file().string()},
                {"universe", universe_file().string()},
                {"model", model},
                {"ratio", ratio},
                {"test_fraction", test_fraction},
                {"threshold", threshold},
                {"beta", beta},
                {"encoded_size", encoded_size},
                {"ae_first_width", ae_first_width},
                {"ae_epochs", ae_epochs},
                {"ae_batch", ae_batch},
                {"ae_max_rows", ae_max_rows},
                {"ae_lr", ae_lr},
                {"architecture", architecture},
                {"hidden", hidden},
                {"optimizer", optimizer},
                {"lr", lr},
                {"momentum", momentum},
                {"batch", batch},
                {"epochs", epochs},
                {"dropout", dropout},
                {"batch_norm", !no_batch_norm},
                {"w0", w0},
                {"w1", w1},
                {"rf_trees", rf_trees},
                {"rf_depth", rf_depth},
                {"rf_min_samples", rf_min_samples},
                {"rf_features", rf_features},
                {"rf_bootstrap", !rf_no_bootstrap},
                {"rf_weighted", rf_weighted},
                {"rf_threads", rf_threads},
                {"seeds", seeds}};
  }
};

struct LoadedData {
  FeatureSchema schema;
  std::vector<RawRecord> audience;
  std::vector<RawRecord> universe;
  std::string fingerprint;  // identifies the inputs for compare
};

inline LoadedData load_data(const TrainOptions& o) {
  if (o.data_dir.empty() && (o.schema_path.empty() || o.audience_path.empty() || o.universe_path.empty())) {
    throw ConfigError("give --data DIR or all of --schema, --audience and --universe");
  }
  LoadedData d;
  const auto schema_text = read_file(o.schema_file());
  const auto audience_text = read_file(o.audience_file());
  const auto universe_text = read_file(o.universe_file());
  d.schema = FeatureSchema::parse(schema_text);
  d.audience = parse_records(audience_text, d.schema);
  d.universe = parse_records(universe_text, d.schema);
  d.fingerprint = hex64(fnv1a64(universe_text, fnv1a64(audience_text, fnv1a64(schema_text))));
  return d;
}

inline std::string trace_csv(std::span<const double> trace) {
  std::string s = "epoch,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) s += std::to_string(i + 1) + "," + format_double(trace[i]) + "\n";
  return s;
}

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"accuracy", "precision", "recall", "f_beta"};
  return names;
}

inline double metric_value(const MetricReport& m, const std::string& name) {
  if (name == "accuracy") return m.accuracy;
  if (name == "precision") return m.precision;
  if (name == "recall") return m.recall;
  return m.f_beta;
}

/// "71.03 ± 0.26" in percent.
inline std::string percent_pm(const MeanStd& m) { return fixed(100.0 * m.mean, 2) + " ± " + fixed(100.0 * m.stddev, 2); }

struct SeedMetrics {
  std::vector<MetricReport> train;
  std::vector<MetricReport> test;
};

inline MeanStd aggregate(const std::vector<MetricReport>& reports, const std::string& metric) {
  std::vector<double> v;
  for (const auto& r : reports) v.push_back(metric_value(r, metric));
  return mean_std(v);
}

inline void cmd_train(const TrainOptions& o, std::ostream& log) {
  const auto cfg = o.pipeline();
  OutputDir out(o.out, o.force);
  const auto data = load_data(o);
  SeedMetrics all;
  for (const auto seed : o.seeds) {
    const auto prepared = prepare_data(data.schema, data.audience, data.universe, cfg.ratio, cfg.test_fraction, seed);
    auto r = run_pipeline(prepared, cfg, seed);
    const std::string dir = "seed-" + std::to_string(seed) + "/";
    out.write(dir + "model.pkmb", bundle_bytes(ModelBundle{data.schema, prepared.stats, r.model, cfg.threshold}));
    out.write(dir + "metrics.csv", "split," + metric_csv_header() + "\ntrain," + metric_csv_row(r.train) + "\ntest," +
                                       metric_csv_row(r.test) + "\n");
    out.write(dir + "report.txt", "[train]\n" + metric_report_text(r.train) + "\n[test]\n" + metric_report_text(r.test));
    if (cfg.model == ModelKind::dl_ae) {
      out.write(dir + "autoencoder_loss.csv", trace_csv(r.autoencoder_trace));
      out.write(dir + "classifier_loss.csv", trace_csv(r.classifier_trace));
    }
    all.train.push_back(r.train);
    all.test.push_back(r.test);
    log << "seed " << seed << ": test precision " << fixed(r.test.precision) << " recall " << fixed(r.test.recall)
        << " f" << format_double(cfg.beta) << " " << fixed(r.test.f_beta) << "\n";
  }
  std::string csv = "split,metric,mean,std,seeds\n";
  std::string text = "model " + to_string(cfg.model) + ", ratio " + std::to_string(cfg.ratio) + ", " +
                     std::to_string(o.seeds.size()) + " seed(s), percent mean ± std\n";
  for (const auto& [split_name, reports] : {std::pair{"train", &all.train}, std::pair{"test", &all.test}}) {
    text += split_name;
    text += ":";
    for (const auto& m : metric_names()) {
      const auto ms = aggregate(*reports, m);
      csv += std::string(split_name) + "," + m + "," + format_double(ms.mean) + "," + format_double(ms.stddev) + "," +
             std::to_string(reports->size()) + "\n";
      text += "  " + m + " " + percent_pm(ms);
    }
    text += "\n";
  }
  out.write("summary.csv", csv);
  out.write("summary.txt", text);
  auto config = o.to_json();
  config["data_fingerprint"] = data.fingerprint;
  out.finish("train", config);
  log << text;
}

struct SweepOptions {
  TrainOptions train;
  std::string kind;  // encoder_size, architecture or ratio
  std::vector<std::string> values;
};

inline std::vector<std::string> sweep_values(const SweepOptions& o) {
  if (!o.values.empty()) return o.values;
  if (o.kind == "encoder_size") return {"16", "32", "64", "128"};
  if (o.kind == "architecture") return {"A512", "A2048", "A4096"};
  if (o.kind == "ratio") return {"1", "2", "3", "4", "5", "6", "7", "8", "9", "10"};
  throw ConfigError("unknown sweep kind '" + o.kind + "' (expected encoder_size, architecture or ratio)");
}

inline long long parse_sweep_integer(const std::string& v) {
  std::size_t used = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError("sweep value '" + v + "' is not an integer");
  return n;
}

/// Applies one sweep value to the pipeline config after checking it is allowed.
inline void apply_sweep_value(const std::string& kind, const std::string& v, PipelineConfig& cfg) {
  if (kind == "encoder_size") {
    const auto n = parse_sweep_integer(v);
    if (n != 16 && n != 32 && n != 64 && n != 128) throw ConfigError("encoder size must be one of 16, 32, 64, 128");
    if (cfg.model != ModelKind::dl_ae) throw ConfigError("encoder_size sweeps need --model dl-ae");
    cfg.autoencoder.encoded_size = static_cast<std::size_t>(n);
  } else if (kind == "architecture") {
    const auto a = parse_architecture(v);
    if (cfg.model != ModelKind::dl_ae) throw ConfigError("architecture sweeps need --model dl-ae");
    cfg.classifier.architecture = a;
  } else if (kind == "ratio") {
    const auto n = parse_sweep_integer(v);
    if (n < 1 || n > 10) throw ConfigError("sweep ratios must be in 1..10");
    cfg.ratio = n;
  } else {
    throw ConfigError("unknown sweep kind '" + kind + "'");
  }
}

inline void cmd_sweep(const SweepOptions& o, std::ostream& log) {
  const auto base = o.train.pipeline();
  const auto values = sweep_values(o);
  for (const auto& v : values) {
    auto probe = base;
    apply_sweep_value(o.kind, v, probe);
  }
  OutputDir out(o.train.out, o.train.force);
  const auto data = load_data(o.train);

  std::string csv = "kind,value,split,seeds,positives,negatives";
  for (const auto& m : metric_names()) csv += "," + m + "_mean," + m + "_std";
  csv += "\n";
  char line[256];
  std::snprintf(line, sizeof(line), "%-8s %-6s %-16s %-16s %-16s %-16s\n", o.kind == "encoder_size" ? "size" : o.kind.c_str(),
                "split", "accuracy", "precision", "recall", "f_beta");
  std::string text = line;
  for (const auto& v : values) {
    auto cfg = base;
    apply_sweep_value(o.kind, v, cfg);
    SeedMetrics all;
    std::size_t positives = 0, negatives = 0;
    for (const auto seed : o.train.seeds) {
      const auto prepared = prepare_data(data.schema, data.audience, data.universe, cfg.ratio, cfg.test_fraction, seed);
      const auto r = run_pipeline(prepared, cfg, seed);
      positives = r.positives;
      negatives = r.negatives;
      all.train.push_back(r.train);
      all.test.push_back(r.test);
    }
    for (const auto& [split_name, reports] : {std::pair{"train", &all.train}, std::pair{"test", &all.test}}) {
      csv += o.kind + "," + v + "," + split_name + "," + std::to_string(reports->size()) + "," +
             std::to_string(positives) + "," + std::to_string(negatives);
      std::vector<std::string> cells;
      for (const auto& m : metric_names()) {
        const auto ms = aggregate(*reports, m);
        csv += "," + format_double(ms.mean) + "," + format_double(ms.stddev);
        cells.push_back(percent_pm(ms));
      }
      csv += "\n";
      std::snprintf(line, sizeof(line), "%-8s %-6s %-17s %-17s %-17s %-17s\n", v.c_str(), split_name, cells[0].c_str(),
                    cells[1].c_str(), cells[2].c_str(), cells[3].c_str());
      text += line;
    }
    log << o.kind << " " << v << " done\n";
  }
  out.write("sweep.csv", csv);
  out.write("sweep.txt", text);
  auto config = o.train.to_json();
  config["sweep_kind"] = o.kind;
  config["sweep_values"] = values;
  config["data_fingerprint"] = data.fingerprint;
  out.finish("sweep", config);
  log << text;
}

// rank / campaign

inline ModelBundle load_model(const std::string& path) {
  try {
    return load_bundle(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

/// Loads universe records with the model's schema. A --schema file, when
/// given, must match the model's schema column for column.
inline std::vector<RawRecord> load_universe(const ModelBundle& model, const std::string& universe_path,
                                            const std::string& schema_path) {
  if (!schema_path.empty()) {
    const auto given = FeatureSchema::load(schema_path);
    if (given.fingerprint() != model.schema.fingerprint()) {
      std::string detail;
      const auto n = std::min(given.size(), model.schema.size());
      for (std::size_t i = 0; i < n && detail.empty(); ++i) {
        if (!(given.columns()[i] == model.schema.columns()[i])) {
          detail = "column " + std::to_string(i + 1) + " is '" + given.columns()[i].name + "' in " + schema_path +
                   " but '" + model.schema.columns()[i].name + "' in the model";
        }
      }
      if (detail.empty()) {
        detail = given.size() != model.schema.size()
                     ? std::to_string(given.size()) + " columns vs " + std::to_string(model.schema.size()) + " in the model"
                     : "id column differs";
      }
      throw ConfigError("schema mismatch: " + detail);
    }
  }
  try {
    return parse_records(read_file(universe_path), model.schema);
  } catch (const DataError& e) {
    // header problems mean the file was written for another schema
    throw DataError((e.line() == 1 ? "schema mismatch in " : "") + universe_path + ": " + e.what());
  }
}

struct RankOptions {
  std::string model;
  std::string universe;
  std::string schema;
  std::string out;
  bool force = false;
};

inline void cmd_rank(const RankOptions& o, std::ostream& log) {
  const auto model = load_model(o.model);
  const auto records = load_universe(model, o.universe, o.schema);
  OutputDir out(o.out, o.force);
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.id);
  const auto probs = score_records(model, records);
  out.write("ranked.csv", ranked_csv(probs, ids));
  out.finish("rank", json{{"model", o.model},
                          {"model_fingerprint", file_fingerprint(o.model)},
                          {"universe", o.universe},
                          {"universe_fingerprint", file_fingerprint(o.universe)}});
  log << "ranked " << records.size() << " records\n";
}

struct CampaignOptions {
  std::vector<std::string> models;
  std::string universe;
  std::string truth;
  std::string schema;
  long long reach = 0;
  std::string audience = "audience";
  std::string out;
  bool force = false;
};

inline void cmd_campaign(const CampaignOptions& o, std::ostream& log) {
  if (o.models.empty() || o.models.size() > 2) throw ConfigError("campaign takes one or two --model files");
  if (o.reach <= 0) throw ConfigError("--reach must be positive");
  const auto truth = parse_ground_truth(read_file(o.truth));
  const auto universe_fp = file_fingerprint(o.universe);
  std::vector<CampaignReport> reports;
  std::vector<TaggedReport> tagged;
  for (const auto& path : o.models) {
    const auto model = load_model(path);
    const auto records = load_universe(model, o.universe, o.schema);
    if (static_cast<std::size_t>(o.reach) > records.size()) {
      throw ConfigError("reach " + std::to_string(o.reach) + " exceeds the universe size " +
                        std::to_string(records.size()));
    }
    std::vector<std::string> ids;
    for (const auto& r : records) ids.push_back(r.id);
    std::string tag = to_string(model.model.kind());
    if (!reports.empty() && reports.front().model == tag) tag += "-2";
    reports.push_back(simulate_campaign(rank_universe(score_records(model, records), ids), o.reach, truth, tag));
    tagged.push_back({tag, o.audience, universe_fp, reports.back()});
  }
  OutputDir out(o.out, o.force);
  out.write("campaign.csv", campaign_csv(reports, o.audience));
  auto text = campaign_summary(reports, o.audience);
  if (tagged.size() == 2) {
    const auto table = compare_models(tagged, tagged[0].tag, tagged[1].tag);
    out.write("comparison.csv", comparison_csv(table));
    text += tagged[0].tag + " vs " + tagged[1].tag + ": " + to_string(table.outcomes.front()) + "\n";
  }
  out.write("campaign.txt", text);
  json models = json::array();
  for (const auto& m : o.models) models.push_back(json{{"path", m}, {"fingerprint", file_fingerprint(m)}});
  out.finish("campaign", json{{"models", models},
                              {"universe", o.universe},
                              {"universe_fingerprint", universe_fp},
                              {"truth", o.truth},
                              {"truth_fingerprint", file_fingerprint(o.truth)},
                              {"reach", o.reach},
                              {"audience", o.audience}});
  log << text;
}

// compare

struct CompareOptions {
  std::vector<std::string> campaigns;  // campaign.csv files
  std::vector<std::string> runs;       // train output directories
  std::vector<std::string> tags;       // the two models, first is the reference
  std::string out;
  bool force = false;
};

inline std::vector<TaggedReport> read_campaign_reports(const std::string& path, std::size_t index) {
  const auto t = CsvTable::parse(read_file(path));
  const auto method = t.column("method");
  const auto audience = t.column("audience");
  const auto reach = t.column("reach");
  const auto converters = t.column("converters");
  const auto conversions = t.column("conversions");
  std::vector<TaggedReport> out;
  for (const auto& row : t.rows) {
    CampaignReport r;
    r.model = row.fields[method];
    double v = 0;
    if (!parse_double(row.fields[reach], v) || v <= 0) throw DataError(path + ": bad reach", row.line);
    r.reach = static_cast<long long>(v);
    if (!parse_double(row.fields[converters], v) || v < 0) throw DataError(path + ": bad converters", row.line);
    r.converters = static_cast<long long>(v);
    if (!parse_double(row.fields[conversions], v) || v < 0) throw DataError(path + ": bad conversions", row.line);
    r.conversions = static_cast<long long>(v);
    r.cvr = static_cast<double>(r.conversions) / static_cast<double>(r.reach);
    const auto& a = row.fields[audience];
    out.push_back({r.model, std::to_string(index) + ":" + a, a, r});
  }
  return out;
}

inline std::vector<TaggedReport> read_run_reports(const std::string& dir) {
  const auto manifest = json::parse(read_file(fs::path(dir) / "manifest.json"));
  if (manifest.value("command", "") != "train") throw DataError(dir + " is not a train run");
  const auto& config = manifest.at("config");
  const auto kind = parse_model_kind(config.at("model").get<std::string>());
  const double beta = config.at("beta").get<double>();
  const auto fingerprint = config.at("data_fingerprint").get<std::string>();
  std::vector<TaggedReport> out;
  for (const auto seed : config.at("seeds").get<std::vector<std::uint64_t>>()) {
    const auto path = fs::path(dir) / ("seed-" + std::to_string(seed)) / "metrics.csv";
    const auto t = CsvTable::parse(read_file(path));
    for (const auto& row : t.rows) {
      if (row.fields[t.column("split")] != "test") continue;
      ConfusionCounts c;
      std::size_t* cells[] = {&c.tp, &c.fp, &c.tn, &c.fn};
      const char* names[] = {"tp", "fp", "tn", "fn"};
      for (int i = 0; i < 4; ++i) {
        double v = 0;
        if (!parse_double(row.fields[t.column(names[i])], v) || v < 0) throw DataError(path.string() + ": bad count", row.line);
        *cells[i] = static_cast<std::size_t>(v);
      }
      out.push_back({to_string(kind), "seed-" + std::to_string(seed), fingerprint, metrics_from_counts(c, beta)});
    }
  }
  return out;
}

inline void cmd_compare(const CompareOptions& o, std::ostream& log) {
  std::vector<TaggedReport> reports;
  for (std::size_t i = 0; i < o.campaigns.size(); ++i) {
    for (auto& r : read_campaign_reports(o.campaigns[i], i)) reports.push_back(std::move(r));
  }
  for (const auto& d : o.runs) {
    for (auto& r : read_run_reports(d)) reports.push_back(std::move(r));
  }
  std::vector<std::string> tags = o.tags;
  if (tags.empty()) {
    for (const auto& r : reports) {
      if (std::find(tags.begin(), tags.end(), r.tag) == tags.end()) tags.push_back(r.tag);
    }
  }
  if (tags.size() != 2) throw ConfigError("compare needs exactly two model tags (found " + std::to_string(tags.size()) + ")");
  const auto table = compare_models(reports, tags[0], tags[1]);
  OutputDir out(o.out, o.force);
  out.write("comparison.csv", comparison_csv(table));
  std::string text = tags[0] + " vs " + tags[1] + " over " + std::to_string(table.outcomes.size()) + " paired run(s): " +
                     std::to_string(table.tally.wins) + " wins, " + std::to_string(table.tally.ties) + " ties, " +
                     std::to_string(table.tally.losses) + " losses\n";
  out.write("comparison.txt", text);
  json inputs = json::array();
  for (const auto& c : o.campaigns) inputs.push_back(json{{"campaign", c}, {"fingerprint", file_fingerprint(c)}});
  for (const auto& d : o.runs) {
    inputs.push_back(json{{"run", d}, {"fingerprint", file_fingerprint(fs::path(d) / "manifest.json")}});
  }
  out.finish("compare", json{{"inputs", inputs}, {"tags", tags}});
  log << text;
}

// argument parsing

inline void add_train_flags(CLI::App& cmd, TrainOptions& o) {
  cmd.add_option("--data", o.data_dir, "Directory with schema.txt, audience.csv and universe.csv");
  cmd.add_option("--schema", o.schema_path, "Schema file (overrides --data)");
  cmd.add_option("--audience", o.audience_path, "Audience CSV (overrides --data)");
  cmd.add_option("--universe", o.universe_path, "Universe CSV (overrides --data)");
  cmd.add_option("--model", o.model, "dl-ae or rf")->capture_default_str();
  cmd.add_option("--ratio", o.ratio, "Negatives per audience record")->capture_default_str();
  cmd.add_option("--test-fraction", o.test_fraction)->capture_default_str();
  cmd.add_option("--threshold", o.threshold, "Decision threshold")->capture_default_str();
  cmd.add_option("--beta", o.beta, "F-beta weight on recall")->capture_default_str();
  cmd.add_option("--encoded-size", o.encoded_size)->capture_default_str();
  cmd.add_option("--ae-first-width", o.ae_first_width, "First encoder layer, halved down to the code")->capture_default_str();
  cmd.add_option("--ae-epochs", o.ae_epochs)->capture_default_str();
  cmd.add_option("--ae-batch", o.ae_batch)->capture_default_str();
  cmd.add_option("--ae-max-rows", o.ae_max_rows, "Autoencoder training subsample, 0 = all rows")->capture_default_str();
  cmd.add_option("--ae-lr", o.ae_lr, "Adam learning rate")->capture_default_str();
  cmd.add_option("--architecture", o.architecture, "A512, A2048, A4096 or custom")->capture_default_str();
  cmd.add_option("--hidden", o.hidden, "Hidden widths for --architecture custom")->delimiter(',');
  cmd.add_option("--optimizer", o.optimizer, "sgd (momentum) or adam")->capture_default_str();
  cmd.add_option("--lr", o.lr)->capture_default_str();
  cmd.add_option("--momentum", o.momentum)->capture_default_str();
  cmd.add_option("--batch", o.batch)->capture_default_str();
  cmd.add_option("--epochs", o.epochs)->capture_default_str();
  cmd.add_option("--dropout", o.dropout)->capture_default_str();
  cmd.add_flag("--no-batch-norm", o.no_batch_norm);
  cmd.add_option("--w0", o.w0, "Class-0 loss weight (default: inverse frequency)");
  cmd.add_option("--w1", o.w1, "Class-1 loss weight (default: inverse frequency)");
  cmd.add_option("--rf-trees", o.rf_trees)->capture_default_str();
  cmd.add_option("--rf-depth", o.rf_depth)->capture_default_str();
  cmd.add_option("--rf-min-samples", o.rf_min_samples, "Rows (>= 1) or a fraction of rows (< 1)")->capture_default_str();
  cmd.add_option("--rf-features", o.rf_features, "Features per split, 0 = ceil(sqrt(d))")->capture_default_str();
  cmd.add_flag("--rf-no-bootstrap", o.rf_no_bootstrap);
  cmd.add_flag("--rf-weighted", o.rf_weighted, "Class-weighted Gini");
  cmd.add_option("--rf-threads", o.rf_threads, "0 = hardware concurrency")->capture_default_str();
  cmd.add_option("--seeds,--seed", o.seeds, "Comma-separated seeds")->delimiter(',')->capture_default_str();
  cmd.add_option("--out", o.out, "Output directory")->required();
  cmd.add_flag("--force", o.force, "Allow a non-empty output directory");
}

/// Parses argv and runs one subcommand. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Prospecting models for imbalanced tabular data"};
  app.set_config("--config", "", "TOML/INI file; keys are flag names, one [section] per subcommand");
  app.require_subcommand(1);

  SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic audience, universe and conversions");
  s->add_option("--universe-size", synth.spec.universe_size)->capture_default_str();
  s->add_option("--audience-size", synth.spec.audience_size)->capture_default_str();
  s->add_option("--numeric", synth.spec.numeric_dims, "Numeric columns")->capture_default_str();
  s->add_option("--categorical", synth.spec.categorical_cardinalities, "Categorical cardinalities")->delimiter(',');
  s->add_option("--separation", synth.spec.separation, "Customer shift in standard deviations")->capture_default_str();
  s->add_option("--lookalike", synth.spec.lookalike_fraction, "Universe share drawn like customers")
      ->capture_default_str();
  s->add_option("--base-rate", synth.spec.base_conversion_rate)->capture_default_str();
  s->add_option("--propensity-slope", synth.spec.propensity_slope)->capture_default_str();
  s->add_option("--repeat-mean", synth.spec.repeat_purchase_mean)->capture_default_str();
  s->add_option("--seed", synth.spec.seed)->capture_default_str();
  s->add_option("--window", synth.attribution_window, "Attribution window label")->capture_default_str();
  s->add_option("--out", synth.out)->required();
  s->add_flag("--force", synth.force);

  TrainOptions train;
  auto* t = app.add_subcommand("train", "Train DL-AE or RF and report train/test metrics");
  add_train_flags(*t, train);

  SweepOptions sweep;
  auto* w = app.add_subcommand("sweep", "Sweep encoder size, architecture or ratio");
  add_train_flags(*w, sweep.train);
  w->add_option("--kind", sweep.kind, "encoder_size, architecture or ratio")->required();
  w->add_option("--values", sweep.values, "Comma-separated values (default: the full set)")->delimiter(',');

  RankOptions rank;
  auto* r = app.add_subcommand("rank", "Score and rank a universe");
  r->add_option("--model", rank.model)->required();
  r->add_option("--universe", rank.universe)->required();
  r->add_option("--schema", rank.schema, "Must match the model's schema");
  r->add_option("--out", rank.out)->required();
  r->add_flag("--force", rank.force);

  CampaignOptions campaign;
  auto* c = app.add_subcommand("campaign", "Simulate a mailing to the top-ranked records");
  c->add_option("--model", campaign.models, "One or two model bundles")->required();
  c->add_option("--universe", campaign.universe)->required();
  c->add_option("--truth", campaign.truth, "Conversions CSV")->required();
  c->add_option("--schema", campaign.schema, "Must match the model's schema");
  c->add_option("--reach", campaign.reach)->required();
  c->add_option("--audience-name", campaign.audience, "Label for reports")->capture_default_str();
  c->add_option("--out", campaign.out)->required();
  c->add_flag("--force", campaign.force);

  CompareOptions compare;
  auto* m = app.add_subcommand("compare", "Tally wins, ties and losses between two models");
  m->add_option("--campaign", compare.campaigns, "campaign.csv files");
  m->add_option("--run", compare.runs, "train output directories");
  m->add_option("--tags", compare.tags, "Two model tags, reference first")->delimiter(',');
  m->add_option("--out", compare.out)->required();
  m->add_flag("--force", compare.force);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*s) cmd_synth(synth, out);
    if (*t) cmd_train(train, out);
    if (*w) cmd_sweep(sweep, out);
    if (*r) cmd_rank(rank, out);
    if (*c) cmd_campaign(campaign, out);
    if (*m) cmd_compare(compare, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace prospect::cli
