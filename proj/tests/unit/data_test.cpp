#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "prospect/data/dataset.hpp"
#include "prospect/data/synthetic.hpp"

using namespace prospect;

namespace {

FeatureSchema small_schema() {
  return FeatureSchema::parse(
      "schema_version: 1\n"
      "id_column: id\n"
      "column: age numeric\n"
      "column: income numeric nullable\n"
      "column: region categorical vocab=a|b|c\n"
      "column: zip categorical buckets=8\n");
}

std::vector<RawRecord> make_records(std::size_t n, const std::string& prefix) {
  std::vector<RawRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({prefix + std::to_string(i), {static_cast<double>(i)}});
  }
  return out;
}

FeatureSchema one_numeric() { return FeatureSchema("id", {{"x", ColumnKind::numeric, false, {}, 0}}); }

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() / ("prospect_data_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                                     "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST(Schema, ParseAndWidth) {
  const auto s = small_schema();
  EXPECT_EQ(s.size(), 4u);
  EXPECT_EQ(s.columns()[2].encoding(), CategoricalEncoding::one_hot);
  EXPECT_EQ(s.columns()[3].encoding(), CategoricalEncoding::hashed);
  EXPECT_EQ(s.encoded_width(), 1u + 2u + 3u + 8u);
  EXPECT_EQ(FeatureSchema::parse(s.to_text()), s);
  EXPECT_EQ(FeatureSchema::parse(s.to_text()).fingerprint(), s.fingerprint());
}

TEST(Schema, LargeVocabularyIsHashed) {
  ColumnSpec c{"k", ColumnKind::categorical, false, {}, 0};
  for (int i = 0; i < 65; ++i) c.vocabulary.push_back("t" + std::to_string(i));
  EXPECT_EQ(c.encoding(), CategoricalEncoding::hashed);
  EXPECT_EQ(c.encoded_width(), kDefaultHashBuckets);
  c.vocabulary.pop_back();
  EXPECT_EQ(c.encoding(), CategoricalEncoding::one_hot);
  EXPECT_EQ(c.encoded_width(), 64u);
}

TEST(Schema, Errors) {
  EXPECT_THROW(FeatureSchema::parse("id_column: id\ncolumn: a numeric\ncolumn: a numeric\n"), ConfigError);
  EXPECT_THROW(FeatureSchema::parse("id_column: id\ncolumn: a weird\n"), DataError);
  EXPECT_THROW(FeatureSchema::parse("id_column: id\ncolumn: a categorical\n"), ConfigError);
  EXPECT_THROW(FeatureSchema::parse("column: a numeric\n"), ConfigError);
  try {
    FeatureSchema::parse("id_column: id\n\nbogus: 3\n");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Csv, EmptyBody) {
  EXPECT_TRUE(parse_records("id,age,income,region,zip\n", small_schema()).empty());
}

TEST(Csv, RowsPreserveOrder) {
  const auto recs = parse_records(
      "id,age,income,region,zip\n"
      "r3,1.5,,a,x\n"
      "r1,2,100,b,\"y,z\"\n"
      "r2,3,7,c,q\n",
      small_schema());
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].id, "r3");
  EXPECT_EQ(recs[1].id, "r1");
  EXPECT_EQ(recs[2].id, "r2");
  EXPECT_TRUE(is_missing(recs[0].values[1]));
  EXPECT_EQ(std::get<std::string>(recs[1].values[3]), "y,z");
  EXPECT_DOUBLE_EQ(std::get<double>(recs[2].values[0]), 3.0);
}

TEST(Csv, HeaderOrderIsFree) {
  const auto recs = parse_records("zip,region,id,income,age\nq,b,r,5,6\n", small_schema());
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_DOUBLE_EQ(std::get<double>(recs[0].values[0]), 6.0);
  EXPECT_EQ(std::get<std::string>(recs[0].values[2]), "b");
}

TEST(Csv, WrongColumnCountNamesLine) {
  try {
    parse_records("id,age,income,region,zip\nr1,1,2,a,x\nr2,1,2,a\n", small_schema());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Csv, Errors) {
  const auto s = small_schema();
  EXPECT_THROW(parse_records("id,age,income,region,zip,extra\n", s), DataError);
  EXPECT_THROW(parse_records("id,age,income,region\n", s), DataError);
  EXPECT_THROW(parse_records("id,age,income,region,zip\nr,1,2,a,x\nr,1,2,a,x\n", s), DataError);
  EXPECT_THROW(parse_records("id,age,income,region,zip\nr,abc,2,a,x\n", s), DataError);
  EXPECT_THROW(parse_records("id,age,income,region,zip\nr,nan,2,a,x\n", s), DataError);
  EXPECT_THROW(parse_records("", s), DataError);
}

TEST(Csv, RoundTripThroughFile) {
  TempDir dir;
  const auto s = small_schema();
  const auto recs = parse_records("id,age,income,region,zip\nr1,0.1,,a,\"q\"\"x\"\nr2,-3e5,4,c,z\n", s);
  write_file_atomic(dir.path / "r.csv", records_to_csv(recs, s));
  EXPECT_EQ(load_csv(dir.path / "r.csv", s), recs);
  EXPECT_THROW(load_csv(dir.path / "missing.csv", s), Error);
}

TEST(Encode, ZScores) {
  const auto s = one_numeric();
  const auto res = encode(make_records(3, "r"), s);
  // values 0,1,2: mean 1, population sd sqrt(2/3)
  const double sd = std::sqrt(2.0 / 3.0);
  EXPECT_NEAR(res.features(0, 0), -1.0 / sd, 1e-12);
  EXPECT_NEAR(res.features(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(res.features(2, 0), 1.0 / sd, 1e-12);
  EXPECT_NEAR(res.features(2, 0), 1.2247, 1e-4);
}

TEST(Encode, OneHot) {
  const FeatureSchema s("id", {{"c", ColumnKind::categorical, false, {"a", "b", "c"}, 0}});
  const auto res = encode(std::vector<RawRecord>{{"r", {std::string("b")}}}, s);
  EXPECT_EQ(std::vector<double>(res.features.values().begin(), res.features.values().end()), (std::vector<double>{0, 1, 0}));
  EXPECT_THROW(encode(std::vector<RawRecord>{{"r", {std::string("d")}}}, s), DataError);
}

TEST(Encode, ConstantColumnIsZero) {
  std::vector<RawRecord> recs{{"a", {5.0}}, {"b", {5.0}}, {"c", {5.0}}};
  const auto res = encode(recs, one_numeric());
  for (const double v : res.features.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(res.stats.columns[0].stddev, 1.0);
}

TEST(Encode, MissingAndHashed) {
  const auto s = small_schema();
  const auto recs = parse_records("id,age,income,region,zip\nr1,1,,a,k\nr2,3,10,b,\n", s);
  const auto res = encode(recs, s);
  ASSERT_EQ(res.features.cols(), s.encoded_width());
  EXPECT_EQ(res.features(0, 1), 0.0);
  EXPECT_EQ(res.features(0, 2), 1.0);
  EXPECT_EQ(res.features(1, 2), 0.0);
  // hashed column: exactly one bucket set, the FNV bucket of the token
  const std::size_t base = 6;
  double sum = 0;
  for (std::size_t b = 0; b < 8; ++b) sum += res.features(0, base + b);
  EXPECT_EQ(sum, 1.0);
  EXPECT_EQ(res.features(0, base + fnv1a64("k") % 8), 1.0);
  EXPECT_EQ(res.features(1, base + fnv1a64("") % 8), 1.0);
}

TEST(Encode, StatsReuseAndMismatch) {
  const auto s = one_numeric();
  const auto train = make_records(4, "t");
  const auto fitted = fit_encoding(train, s);
  const auto a = encode(train, s, &fitted);
  const auto b = encode(train, s, &fitted);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.features, encode(train, s).features);
  EXPECT_THROW(encode(train, small_schema(), &fitted), ConfigError);

  ByteWriter w;
  write_stats(w, fitted);
  ByteReader r(w.buffer());
  EXPECT_EQ(read_stats(r), fitted);
}

TEST(Dataset, RatioCounts) {
  const auto audience = make_records(1000, "a");
  const auto universe = make_records(6000, "u");
  const auto ds = build_prospecting_dataset(audience, universe, 4, 7);
  EXPECT_EQ(ds.size(), 5000u);
  EXPECT_EQ(ds.count(1), 1000u);
  EXPECT_EQ(ds.count(0), 4000u);
  EXPECT_DOUBLE_EQ(ds.class_weights.w1 / ds.class_weights.w0, 4.0);
  EXPECT_DOUBLE_EQ(ds.class_weights.w1 * 1000.0, ds.class_weights.w0 * 4000.0);
}

TEST(Dataset, RatioOneBalanced) {
  const auto ds = build_prospecting_dataset(make_records(50, "a"), make_records(60, "u"), 1, 1);
  EXPECT_EQ(ds.class_weights.w0, ds.class_weights.w1);
  EXPECT_EQ(ds.class_weights.w0, 2.0);
}

TEST(Dataset, Exclusion) {
  auto audience = make_records(20, "x");
  auto universe = make_records(100, "x");  // ids x0..x19 overlap the audience
  const auto ds = build_prospecting_dataset(audience, universe, 4, 3);
  std::set<std::string> pos, neg;
  for (std::size_t i = 0; i < ds.size(); ++i) (ds.labels[i] ? pos : neg).insert(ds.record_ids[i]);
  EXPECT_EQ(pos.size(), 20u);
  EXPECT_EQ(neg.size(), 80u);
  for (const auto& id : neg) EXPECT_FALSE(pos.contains(id));
  EXPECT_THROW(build_prospecting_dataset(audience, universe, 5, 3), DataError);
  EXPECT_THROW(build_prospecting_dataset(audience, universe, 0, 3), ConfigError);
}

TEST(Dataset, PositivesConstantAcrossRatios) {
  const auto audience = make_records(30, "a");
  const auto universe = make_records(400, "u");
  for (long long r = 1; r <= 10; ++r) {
    const auto ds = build_prospecting_dataset(audience, universe, r, 11);
    EXPECT_EQ(ds.count(1), 30u);
    EXPECT_EQ(ds.count(0), static_cast<std::size_t>(30 * r));
  }
}

TEST(Dataset, SamplingUniformity) {
  const auto audience = make_records(5, "a");
  const auto universe = make_records(40, "u");
  const int trials = 2000;
  std::vector<int> hits(40, 0);
  for (int t = 0; t < trials; ++t) {
    const auto ds = build_prospecting_dataset(audience, universe, 2, derive_seed(99, t));
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.labels[i] == 0) ++hits[std::stoul(ds.record_ids[i].substr(1))];
    }
  }
  const double p = 10.0 / 40.0;
  const double se = std::sqrt(p * (1 - p) / trials);
  for (const int h : hits) EXPECT_LT(std::abs(h / static_cast<double>(trials) - p), 5 * se);
}

TEST(Split, Stratified) {
  const auto ds = build_prospecting_dataset(make_records(20, "a"), make_records(100, "u"), 4, 5);
  const auto s = split(ds, 0.2, 9);
  EXPECT_EQ(s.count(1, Split::test), 4u);
  EXPECT_EQ(s.count(0, Split::test), 16u);
  EXPECT_EQ(s.count(1, Split::train), 16u);
  EXPECT_DOUBLE_EQ(s.class_weights.w1 * 16, s.class_weights.w0 * 64);
  EXPECT_EQ(split(ds, 0.2, 9).split, s.split);
  EXPECT_NE(split(ds, 0.2, 10).split, s.split);
}

TEST(Split, MinimalCases) {
  // two rows per class: one of each per side
  auto ds = build_prospecting_dataset(make_records(2, "a"), make_records(2, "u"), 1, 1);
  const auto s = split(ds, 0.5, 1);
  EXPECT_EQ(s.count(1, Split::test), 1u);
  EXPECT_EQ(s.count(0, Split::test), 1u);
  EXPECT_EQ(s.count(1, Split::train), 1u);
  EXPECT_EQ(s.count(0, Split::train), 1u);
  // one row per class would leave a class without train rows
  auto tiny = build_prospecting_dataset(make_records(1, "a"), make_records(1, "u"), 1, 1);
  EXPECT_THROW(split(tiny, 0.5, 1), DataError);
  EXPECT_THROW(split(ds, 0.0, 1), ConfigError);
  EXPECT_THROW(split(ds, 1.0, 1), ConfigError);
}

TEST(Dataset, EncodeFitsOnTrainAndSnapshots) {
  auto ds = split(build_prospecting_dataset(make_records(10, "a"), make_records(60, "u"), 4, 2), 0.2, 3);
  const auto stats = encode_dataset(ds, one_numeric());
  std::vector<RawRecord> train;
  for (const auto i : ds.indices(Split::train)) train.push_back(ds.records[i]);
  EXPECT_EQ(stats, fit_encoding(train, one_numeric()));
  EXPECT_EQ(ds.features.rows(), ds.size());

  const auto back = load_snapshot(snapshot_bytes(ds));
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_EQ(back.split, ds.split);
  EXPECT_EQ(back.record_ids, ds.record_ids);
  EXPECT_EQ(back.class_weights, ds.class_weights);
  for (std::size_t i = 0; i < ds.features.size(); ++i) {
    EXPECT_NEAR(back.features.values()[i], ds.features.values()[i], 1e-6);
  }
  auto bytes = snapshot_bytes(ds);
  EXPECT_THROW(load_snapshot(bytes.substr(0, bytes.size() - 1)), FormatError);
  bytes[0] = 'X';
  EXPECT_THROW(load_snapshot(bytes), FormatError);
}

TEST(Synthetic, Deterministic) {
  SyntheticPopulationSpec spec;
  spec.universe_size = 2000;
  spec.audience_size = 200;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  EXPECT_EQ(a.audience, b.audience);
  EXPECT_EQ(a.universe, b.universe);
  EXPECT_EQ(a.propensity, b.propensity);
  EXPECT_EQ(a.schema.encoded_width(), 50u);
  spec.seed = 2;
  EXPECT_NE(generate_synthetic(spec).universe, a.universe);
}

TEST(Synthetic, InvalidSpecs) {
  SyntheticPopulationSpec spec;
  spec.universe_size = 100;
  spec.audience_size = 100;
  EXPECT_THROW(generate_synthetic(spec), ConfigError);
  spec.audience_size = 10;
  spec.separation = -1;
  EXPECT_THROW(generate_synthetic(spec), ConfigError);
  spec.separation = 1;
  spec.categorical_cardinalities = {1};
  EXPECT_THROW(generate_synthetic(spec), ConfigError);
}

TEST(Synthetic, PropensityTracksCustomerLikeness) {
  SyntheticPopulationSpec spec;
  spec.universe_size = 20000;
  spec.audience_size = 100;
  spec.lookalike_fraction = 0.2;
  const auto pop = generate_synthetic(spec);
  // CSV round trip keeps every value (4-decimal numerics)
  EXPECT_EQ(parse_records(records_to_csv(pop.universe, pop.schema), pop.schema), pop.universe);
  double mean = 0;
  for (const double p : pop.propensity) {
    ASSERT_GT(p, 0.0);
    ASSERT_LT(p, 1.0);
    mean += p;
  }
  mean /= static_cast<double>(pop.propensity.size());
  const auto conv = sample_conversions(pop.propensity, spec.repeat_purchase_mean, 5);
  std::size_t converters = 0;
  long total = 0;
  for (const int c : conv) {
    converters += c > 0;
    total += c;
  }
  const double n = static_cast<double>(conv.size());
  EXPECT_NEAR(converters / n, mean, 5 * std::sqrt(mean / n));
  EXPECT_GE(total, static_cast<long>(converters));
  EXPECT_EQ(sample_conversions(pop.propensity, 0.3, 5), conv);
}
