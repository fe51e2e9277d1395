#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "ranklab/core/tensor.hpp"

namespace ranklab {

// The simulator's item catalogue: M items with d-dimensional features drawn
// i.i.d. uniform on [0,1].  Immutable after construction; everything is
// reproducible from (M, d, seed).
struct ItemUniverse {
  int num_items = 0;   // M
  int feature_dim = 0; // d
  Tensor features;     // [M x d]
  uint64_t seed = 0;

  std::span<const double> item(int id) const {
    return {features.row(id), static_cast<size_t>(feature_dim)};
  }
};

ItemUniverse build_universe(int M, int d, uint64_t seed);

void save_universe(const std::string& path, const ItemUniverse& u);
ItemUniverse load_universe(const std::string& path);

}  // namespace ranklab
