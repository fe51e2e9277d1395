#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ranklab/core/tensor.hpp"

namespace ranklab {

class Rng;

// One named tensor inside a ParameterSet: shape plus its slice of the flat
// value/gradient storage.
struct ParamInfo {
  std::string name;
  std::vector<int> shape;
  int64_t offset = 0;
  int64_t size = 0;
};

// Ordered collection of named parameter tensors with paired gradients.
// Values and gradients live in flat arrays so the optimizer and the
// finite-difference checker can treat the whole set as one vector.
//
// `version()` increments on every value mutation; forward caches record the
// version they were computed under and backward passes refuse to consume a
// cache whose version no longer matches (StaleCacheError) instead of
// producing silently wrong gradients.
class ParameterSet {
 public:
  ParameterSet() = default;
  explicit ParameterSet(uint64_t rng_seed) : rng_seed_(rng_seed) {}

  // Registers a zero-initialized tensor; the name must be new.
  // Returns the entry index used by the fast accessors.
  int add(const std::string& name, std::vector<int> shape);

  bool has(const std::string& name) const;
  int find(const std::string& name) const;  // throws ConfigError if missing
  int count() const { return static_cast<int>(info_.size()); }
  const ParamInfo& info(int idx) const { return info_[static_cast<size_t>(idx)]; }
  const std::vector<ParamInfo>& entries() const { return info_; }

  int64_t num_scalars() const { return static_cast<int64_t>(values_.size()); }

  // Read access never bumps the version; mutation always does.
  std::span<const double> value(int idx) const;
  std::span<const double> value(const std::string& name) const;
  std::span<double> mutable_value(int idx);
  std::span<double> mutable_value(const std::string& name);

  std::span<double> grad(int idx);
  std::span<double> grad(const std::string& name);
  std::span<const double> grad(int idx) const;

  // Whole-set views for the optimizer / checker.
  std::span<const double> flat_values() const { return values_; }
  std::span<double> mutable_flat_values();
  std::span<double> flat_grads() { return grads_; }
  std::span<const double> flat_grads() const { return grads_; }

  void zero_grads();

  uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

  uint64_t rng_seed() const { return rng_seed_; }
  void set_rng_seed(uint64_t s) { rng_seed_ = s; }

  // Copies values (not grads) into a Tensor per entry, e.g. for checkpoints.
  Tensor value_tensor(int idx) const;
  // Overwrites an entry's values from a tensor of identical shape.
  void set_value(const std::string& name, const Tensor& t);

 private:
  std::vector<ParamInfo> info_;
  std::unordered_map<std::string, int> index_;
  std::vector<double> values_;
  std::vector<double> grads_;
  uint64_t rng_seed_ = 0;
  uint64_t version_ = 0;
};

// Gradient accumulation buffer aligned with a ParameterSet's layout.
// Parallel work items each own one; the batch loop then reduces them into
// the set's own gradients serially, in item order, so results are identical
// for every thread count.
class GradBuffer {
 public:
  GradBuffer() = default;
  explicit GradBuffer(const ParameterSet& ps)
      : flat_(static_cast<size_t>(ps.num_scalars()), 0.0) {}

  void reset(const ParameterSet& ps) {
    flat_.assign(static_cast<size_t>(ps.num_scalars()), 0.0);
  }
  void clear() { std::fill(flat_.begin(), flat_.end(), 0.0); }
  bool empty() const { return flat_.empty(); }

  std::span<double> of(const ParameterSet& ps, int idx) {
    const ParamInfo& pi = ps.info(idx);
    return std::span<double>(flat_.data() + pi.offset, static_cast<size_t>(pi.size));
  }
  std::span<double> flat() { return flat_; }
  std::span<const double> flat() const { return flat_; }

  // grads of `ps` += scale * this
  void add_to(ParameterSet& ps, double scale = 1.0) const;

 private:
  std::vector<double> flat_;
};

// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)), applied to
// one entry; draw order is row-major over the tensor.
void init_uniform_fan_in(ParameterSet& ps, const std::string& name, int fan_in,
                         Rng& rng);

}  // namespace ranklab
