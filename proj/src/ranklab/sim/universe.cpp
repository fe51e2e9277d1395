#include "ranklab/sim/universe.hpp"

#include "ranklab/core/checkpoint.hpp"
#include "ranklab/core/error.hpp"
#include "ranklab/core/rng.hpp"

namespace ranklab {

ItemUniverse build_universe(int M, int d, uint64_t seed) {
  if (M <= 0 || d <= 0)
    throw ConfigError("universe needs positive item count and feature dim");
  ItemUniverse u;
  u.num_items = M;
  u.feature_dim = d;
  u.seed = seed;
  u.features = Tensor::zeros({M, d});
  Rng rng(mix_seed(seed, "universe"));
  for (double& v : u.features.data) v = rng.uniform();
  return u;
}

void save_universe(const std::string& path, const ItemUniverse& u) {
  CheckpointDoc doc;
  doc.arch = "universe M " + std::to_string(u.num_items) + " d " +
             std::to_string(u.feature_dim);
  doc.seed = u.seed;
  doc.tensors.emplace_back("features", u.features);
  write_checkpoint(path, doc);
}

ItemUniverse load_universe(const std::string& path) {
  CheckpointDoc doc = read_checkpoint(path);
  const Tensor& f = doc.tensor("features");
  if (f.rank() != 2) throw IoError("universe features tensor must be rank 2");
  ItemUniverse u;
  u.num_items = f.shape[0];
  u.feature_dim = f.shape[1];
  u.features = f;
  u.seed = doc.seed;
  return u;
}

}  // namespace ranklab
