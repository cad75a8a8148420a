#pragma once

#include "prospect/data/dataset.hpp"
#include "prospect/data/synthetic.hpp"

namespace prospect::testing {

struct SyntheticDataset {
  SyntheticPopulation population;
  LabeledDataset dataset;  // split and encoded
  EncodingStats stats;
};

/// Population -> ratio-sampled dataset -> stratified split -> encoding.
inline SyntheticDataset make_synthetic_dataset(const SyntheticPopulationSpec& spec, long long ratio, std::uint64_t seed,
                                               double test_fraction = 0.2) {
  SyntheticDataset out;
  out.population = generate_synthetic(spec);
  out.dataset = split(build_prospecting_dataset(out.population.audience, out.population.universe, ratio,
                                                derive_seed(seed, streams::sampling)),
                      test_fraction, derive_seed(seed, streams::split));
  out.stats = encode_dataset(out.dataset, out.population.schema);
  return out;
}

inline SyntheticPopulationSpec small_population(double separation, std::uint64_t seed, std::size_t universe = 4000,
                                                std::size_t audience = 400) {
  SyntheticPopulationSpec spec;
  spec.universe_size = universe;
  spec.audience_size = audience;
  spec.separation = separation;
  spec.seed = seed;
  return spec;
}

}  // namespace prospect::testing
