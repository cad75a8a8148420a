#pragma once

#include <optional>
#include <string>
#include <vector>

#include "prospect/classifier.hpp"
#include "prospect/data/dataset.hpp"
#include "prospect/data/schema.hpp"
#include "prospect/eval.hpp"
#include "prospect/forest.hpp"

namespace prospect {

enum class ModelKind : std::uint8_t { dl_ae = 0, rf = 1 };

inline std::string to_string(ModelKind k) { return k == ModelKind::dl_ae ? "DL-AE" : "RF"; }

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "dl-ae" || s == "DL-AE" || s == "dl") return ModelKind::dl_ae;
  if (s == "rf" || s == "RF") return ModelKind::rf;
  throw ConfigError("unknown model '" + std::string(s) + "' (expected dl-ae or rf)");
}

struct PipelineConfig {
  long long ratio = 4;
  double test_fraction = 0.2;
  double threshold = kDefaultThreshold;
  double beta = 2.0;
  ModelKind model = ModelKind::dl_ae;
  AutoencoderConfig autoencoder;
  TrainConfig classifier;
  RfConfig forest;

  void validate() const {
    if (ratio < 1) throw ConfigError("ratio must be >= 1");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0, 1)");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must be in (0, 1)");
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
    autoencoder.validate();
    classifier.validate();
    forest.validate();
  }
};

struct PreparedData {
  LabeledDataset dataset;  // split and encoded
  EncodingStats stats;
};

/// Ratio sampling, stratified split and encoding with stats fitted on the
/// training rows.
inline PreparedData prepare_data(const FeatureSchema& schema, std::span<const RawRecord> audience,
                                 std::span<const RawRecord> universe, long long ratio, double test_fraction,
                                 std::uint64_t seed) {
  PreparedData out;
  out.dataset = split(build_prospecting_dataset(audience, universe, ratio, derive_seed(seed, streams::sampling)),
                      test_fraction, derive_seed(seed, streams::split));
  out.stats = encode_dataset(out.dataset, schema);
  return out;
}

/// Either a DL-AE classifier or a random forest behind one scoring call.
class ScoringModel {
 public:
  explicit ScoringModel(ClassifierModel m) : kind_(ModelKind::dl_ae), classifier_(std::move(m)) {}
  explicit ScoringModel(RandomForest f) : kind_(ModelKind::rf), forest_(std::move(f)) {}

  ModelKind kind() const noexcept { return kind_; }
  const ClassifierModel& classifier() const { return *classifier_; }
  const RandomForest& forest() const { return *forest_; }

  std::size_t input_width() const {
    return kind_ == ModelKind::dl_ae ? classifier_->encoder().input_width() : forest_->input_width();
  }

  std::vector<double> predict(const Tensor2D& x) const {
    return kind_ == ModelKind::dl_ae ? predict_proba(*classifier_, x) : predict_proba_rf(*forest_, x);
  }

 private:
  ModelKind kind_;
  std::optional<ClassifierModel> classifier_;
  std::optional<RandomForest> forest_;
};

struct PipelineResult {
  ScoringModel model;
  MetricReport train;
  MetricReport test;
  std::vector<double> autoencoder_trace;
  std::vector<double> classifier_trace;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

inline MetricReport evaluate(const ScoringModel& model, const LabeledDataset& ds, Split which, double threshold,
                             double beta) {
  return compute_metrics(classify(model.predict(ds.features_of(which)), threshold), ds.labels_of(which), beta);
}

/// Trains the configured model on the training split and reports metrics on
/// both splits. Every random stream is derived from `seed`.
inline PipelineResult run_pipeline(const PreparedData& data, PipelineConfig cfg, std::uint64_t seed) {
  cfg.validate();
  const auto& ds = data.dataset;
  std::vector<double> ae_trace, clf_trace;
  auto model = [&]() -> ScoringModel {
    if (cfg.model == ModelKind::rf) {
      cfg.forest.seed = seed;
      return ScoringModel(fit_forest(ds, cfg.forest));
    }
    cfg.autoencoder.seed = seed;
    cfg.classifier.seed = seed;
    auto ae = train_autoencoder(ds.features_of(Split::train), cfg.autoencoder);
    freeze(ae.model);
    ae_trace = std::move(ae.loss_trace);
    auto clf = train_classifier(ds, ae.model, cfg.classifier);
    clf_trace = std::move(clf.loss_trace);
    return ScoringModel(std::move(clf.model));
  }();
  PipelineResult r{std::move(model), {}, {}, std::move(ae_trace), std::move(clf_trace), ds.count(1), ds.count(0)};
  r.train = evaluate(r.model, ds, Split::train, cfg.threshold, cfg.beta);
  r.test = evaluate(r.model, ds, Split::test, cfg.threshold, cfg.beta);
  return r;
}

/// A trained model together with everything needed to score raw records:
/// the schema and the encoding statistics of its training data.
struct ModelBundle {
  FeatureSchema schema;
  EncodingStats stats;
  ScoringModel model;
  double threshold = kDefaultThreshold;
};

inline constexpr std::uint16_t kBundleFormatVersion = 1;

inline std::string bundle_bytes(const ModelBundle& b) {
  ByteWriter w;
  w.bytes("PKMB");
  w.u16(kBundleFormatVersion);
  w.str(b.schema.to_text());
  write_stats(w, b.stats);
  w.f64(b.threshold);
  w.u8(static_cast<std::uint8_t>(b.model.kind()));
  if (b.model.kind() == ModelKind::dl_ae) {
    write_classifier(w, b.model.classifier());
  } else {
    write_forest(w, b.model.forest());
  }
  return w.take();
}

inline ModelBundle load_bundle(std::string_view bytes) {
  ByteReader r(bytes);
  r.expect_magic("PKMB");
  if (r.u16() != kBundleFormatVersion) throw FormatError("unsupported model bundle version");
  auto schema = FeatureSchema::parse(r.str());
  auto stats = read_stats(r);
  const double threshold = r.f64();
  auto model = [&]() -> ScoringModel {
    const auto kind = r.u8();
    if (kind == static_cast<std::uint8_t>(ModelKind::dl_ae)) return ScoringModel(read_classifier(r));
    if (kind == static_cast<std::uint8_t>(ModelKind::rf)) return ScoringModel(read_forest(r));
    throw FormatError("unknown model kind in bundle");
  }();
  if (!r.done()) throw FormatError("trailing bytes after model bundle");
  if (model.input_width() != schema.encoded_width()) throw FormatError("bundle model width does not match its schema");
  return ModelBundle{std::move(schema), std::move(stats), std::move(model), threshold};
}

/// Encodes raw records with the bundle's schema and stats and scores them.
inline std::vector<double> score_records(const ModelBundle& b, std::span<const RawRecord> records) {
  return b.model.predict(encode(records, b.schema, &b.stats).features);
}

}  // namespace prospect
