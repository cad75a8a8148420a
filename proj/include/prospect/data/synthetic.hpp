#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "prospect/data/csv.hpp"
#include "prospect/data/schema.hpp"
#include "prospect/error.hpp"
#include "prospect/nn/network.hpp"
#include "prospect/random.hpp"

namespace prospect {

/// Parameters of the stand-in population.
///
/// Numeric features are x = offset + scale * (M u) with u ~ N(mu_c, I): the
/// non-customer mean is 0 and the customer mean lies `separation` away along a
/// random unit direction, so `separation` is the Mahalanobis distance between
/// the numeric class-conditionals. M mixes the latent coordinates (unit-norm
/// rows) so the observed columns are correlated. Categorical columns draw from
/// softmax(base + class_shift), where the customer shift scales with
/// separation; at separation 0 both classes are identical.
struct SyntheticPopulationSpec {
  std::size_t universe_size = 50000;
  std::size_t audience_size = 5000;
  std::size_t numeric_dims = 30;
  std::vector<std::size_t> categorical_cardinalities{5, 5, 5, 5};
  double separation = 1.5;
  double lookalike_fraction = 0.05;  // universe share drawn from the customer distribution
  double base_conversion_rate = 0.004;
  double propensity_slope = 1.0;
  double repeat_purchase_mean = 0.3;
  std::uint64_t seed = 1;

  void validate() const {
    if (audience_size == 0) throw ConfigError("audience_size must be positive");
    if (audience_size >= universe_size) throw ConfigError("audience_size must be smaller than universe_size");
    if (numeric_dims + categorical_cardinalities.size() == 0) throw ConfigError("population needs at least one feature");
    for (const auto k : categorical_cardinalities) {
      if (k < 2) throw ConfigError("categorical cardinality must be >= 2");
    }
    if (!(separation >= 0.0) || !std::isfinite(separation)) throw ConfigError("separation must be >= 0");
    if (!(lookalike_fraction >= 0.0 && lookalike_fraction < 1.0)) {
      throw ConfigError("lookalike_fraction must be in [0,1)");
    }
    if (!(base_conversion_rate > 0.0 && base_conversion_rate < 1.0)) {
      throw ConfigError("base_conversion_rate must be in (0,1)");
    }
    if (!(propensity_slope >= 0.0)) throw ConfigError("propensity_slope must be >= 0");
    if (!(repeat_purchase_mean >= 0.0)) throw ConfigError("repeat_purchase_mean must be >= 0");
  }
};

struct SyntheticPopulation {
  FeatureSchema schema;
  std::vector<RawRecord> audience;
  std::vector<RawRecord> universe;
  std::vector<double> propensity;  // per universe record, increasing in customer log-likelihood ratio
};

namespace detail {
inline std::string padded_id(char prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%0*zu", prefix, width, i);
  return buf;
}

inline double round4(double v) { return std::round(v * 1e4) / 1e4; }
}  // namespace detail

inline SyntheticPopulation generate_synthetic(const SyntheticPopulationSpec& spec) {
  spec.validate();
  const std::size_t nd = spec.numeric_dims;
  const std::size_t nc = spec.categorical_cardinalities.size();

  // Population structure.
  Rng structure(derive_seed(spec.seed, 100));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> direction(nd);
  double norm = 0.0;
  for (double& v : direction) {
    v = normal(structure);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  std::vector<double> customer_mean(nd);
  for (std::size_t j = 0; j < nd; ++j) customer_mean[j] = norm > 0 ? spec.separation * direction[j] / norm : 0.0;

  std::vector<double> mixing(nd * nd);
  for (std::size_t i = 0; i < nd; ++i) {
    double row_norm = 0.0;
    for (std::size_t j = 0; j < nd; ++j) {
      const double v = (i == j ? 1.0 : 0.0) + 0.35 * normal(structure);
      mixing[i * nd + j] = v;
      row_norm += v * v;
    }
    for (std::size_t j = 0; j < nd; ++j) mixing[i * nd + j] /= std::sqrt(row_norm);
  }
  std::uniform_real_distribution<double> offset_dist(-5.0, 50.0);
  std::uniform_real_distribution<double> scale_dist(0.5, 20.0);
  std::vector<double> offset(nd), scale(nd);
  for (std::size_t j = 0; j < nd; ++j) {
    offset[j] = offset_dist(structure);
    scale[j] = scale_dist(structure);
  }

  std::vector<std::vector<double>> cat_p0(nc), cat_p1(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    const std::size_t k = spec.categorical_cardinalities[c];
    std::vector<double> base(k), shift(k);
    for (std::size_t v = 0; v < k; ++v) {
      base[v] = 0.5 * normal(structure);
      shift[v] = 0.5 * spec.separation * normal(structure);
    }
    auto softmax = [](std::vector<double> z) {
      const double m = *std::max_element(z.begin(), z.end());
      double s = 0.0;
      for (double& v : z) s += (v = std::exp(v - m));
      for (double& v : z) v /= s;
      return z;
    };
    cat_p0[c] = softmax(base);
    for (std::size_t v = 0; v < k; ++v) base[v] += shift[v];
    cat_p1[c] = softmax(base);
  }

  std::vector<ColumnSpec> columns;
  for (std::size_t j = 0; j < nd; ++j) {
    char name[32];
    std::snprintf(name, sizeof(name), "num_%02zu", j);
    columns.push_back({name, ColumnKind::numeric, false, {}, 0});
  }
  for (std::size_t c = 0; c < nc; ++c) {
    ColumnSpec col;
    col.name = "cat_" + std::to_string(c);
    col.kind = ColumnKind::categorical;
    for (std::size_t v = 0; v < spec.categorical_cardinalities[c]; ++v) col.vocabulary.push_back("v" + std::to_string(v));
    columns.push_back(std::move(col));
  }

  SyntheticPopulation pop;
  pop.schema = FeatureSchema("record_id", std::move(columns));

  const double mean_norm_sq = spec.separation * spec.separation;
  // Draws one record from class `customer`; returns its log-likelihood ratio
  // log p_customer(x) / p_other(x).
  auto draw = [&](Rng& rng, bool customer, RawRecord& rec) {
    rec.values.resize(nd + nc);
    std::vector<double> u(nd);
    double llr = -0.5 * mean_norm_sq;
    for (std::size_t j = 0; j < nd; ++j) {
      u[j] = normal(rng) + (customer ? customer_mean[j] : 0.0);
      llr += customer_mean[j] * u[j];
    }
    for (std::size_t i = 0; i < nd; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < nd; ++j) s += mixing[i * nd + j] * u[j];
      rec.values[i] = detail::round4(offset[i] + scale[i] * s);
    }
    for (std::size_t c = 0; c < nc; ++c) {
      const auto& probs = customer ? cat_p1[c] : cat_p0[c];
      std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
      const std::size_t v = pick(rng);
      rec.values[nd + c] = "v" + std::to_string(v);
      llr += std::log(cat_p1[c][v]) - std::log(cat_p0[c][v]);
    }
    return llr;
  };

  Rng audience_rng(derive_seed(spec.seed, 101));
  pop.audience.resize(spec.audience_size);
  for (std::size_t i = 0; i < spec.audience_size; ++i) {
    pop.audience[i].id = detail::padded_id('A', i, 7);
    draw(audience_rng, true, pop.audience[i]);
  }

  Rng universe_rng(derive_seed(spec.seed, 102));
  std::bernoulli_distribution lookalike(spec.lookalike_fraction);
  const double base_logit = std::log(spec.base_conversion_rate / (1.0 - spec.base_conversion_rate));
  pop.universe.resize(spec.universe_size);
  pop.propensity.resize(spec.universe_size);
  for (std::size_t i = 0; i < spec.universe_size; ++i) {
    pop.universe[i].id = detail::padded_id('U', i, 8);
    const bool customer_like = lookalike(universe_rng);
    const double llr = draw(universe_rng, customer_like, pop.universe[i]);
    pop.propensity[i] = sigmoid(base_logit + spec.propensity_slope * llr);
  }
  return pop;
}

/// Per-record purchase counts within the attribution window: a record converts
/// with its propensity, and a converter makes 1 + Poisson(repeat_mean) purchases.
inline std::vector<int> sample_conversions(std::span<const double> propensity, double repeat_mean, std::uint64_t seed) {
  Rng rng(seed);
  std::poisson_distribution<int> repeats(repeat_mean > 0.0 ? repeat_mean : 1.0);
  std::vector<int> out(propensity.size(), 0);
  for (std::size_t i = 0; i < propensity.size(); ++i) {
    if (std::bernoulli_distribution(propensity[i])(rng)) out[i] = 1 + (repeat_mean > 0.0 ? repeats(rng) : 0);
  }
  return out;
}

}  // namespace prospect
