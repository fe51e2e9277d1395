#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ranklab/sim/rule.hpp"
#include "ranklab/sim/slate.hpp"
#include "ranklab/sim/universe.hpp"

namespace ranklab {

class Rng;

// A labeled collection of slates plus enough provenance to reproduce it.
struct Dataset {
  std::vector<Slate> slates;
  std::string split;          // "train" or "test"
  uint64_t universe_seed = 0;
  uint64_t rule_seed = 0;
  uint64_t generation_seed = 0;
  int list_length = 0;        // N
  int num_items = 0;          // M of the universe
  int feature_dim = 0;        // d of the universe
  int bg_dim = 0;

  int size() const { return static_cast<int>(slates.size()); }
};

// The constant scenario feature used throughout the simulation (no scenario
// variation exists there; the field is plumbed through for real data).
std::vector<double> constant_bg(int bg_dim);

// Draws `num_lists` uniform lists of N distinct items, labels each under the
// rule, and splits them train/test.  List i uses the RNG stream derived from
// (seed, i), so generation is order-independent and parallelizable.
struct GenerateOptions {
  int num_lists = 0;
  int list_length = 0;       // N
  double train_fraction = 0.8;
  int bg_dim = 4;
};
std::pair<Dataset, Dataset> generate_dataset(const ItemUniverse& universe,
                                             const GroundTruthRule& rule,
                                             const GenerateOptions& opts,
                                             uint64_t seed);

// Mean true purchase probability by position over a dataset's logged orders.
std::vector<double> position_profile(const Dataset& dataset,
                                     const GroundTruthRule& rule,
                                     const ItemUniverse& universe);

void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

}  // namespace ranklab
