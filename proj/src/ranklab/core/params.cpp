#include "ranklab/core/params.hpp"

#include <algorithm>
#include <cmath>

#include "ranklab/core/error.hpp"
#include "ranklab/core/rng.hpp"

namespace ranklab {

int ParameterSet::add(const std::string& name, std::vector<int> shape) {
  if (index_.count(name))
    throw ConfigError("parameter '" + name + "' registered twice");
  int64_t n = shape_numel(shape);
  ParamInfo pi;
  pi.name = name;
  pi.shape = std::move(shape);
  pi.offset = static_cast<int64_t>(values_.size());
  pi.size = n;
  int idx = static_cast<int>(info_.size());
  info_.push_back(std::move(pi));
  index_.emplace(name, idx);
  values_.resize(values_.size() + static_cast<size_t>(n), 0.0);
  grads_.resize(grads_.size() + static_cast<size_t>(n), 0.0);
  return idx;
}

bool ParameterSet::has(const std::string& name) const {
  return index_.count(name) != 0;
}

int ParameterSet::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

std::span<const double> ParameterSet::value(int idx) const {
  const ParamInfo& pi = info_[static_cast<size_t>(idx)];
  return {values_.data() + pi.offset, static_cast<size_t>(pi.size)};
}

std::span<const double> ParameterSet::value(const std::string& name) const {
  return value(find(name));
}

std::span<double> ParameterSet::mutable_value(int idx) {
  bump_version();
  const ParamInfo& pi = info_[static_cast<size_t>(idx)];
  return {values_.data() + pi.offset, static_cast<size_t>(pi.size)};
}

std::span<double> ParameterSet::mutable_value(const std::string& name) {
  return mutable_value(find(name));
}

std::span<double> ParameterSet::grad(int idx) {
  const ParamInfo& pi = info_[static_cast<size_t>(idx)];
  return {grads_.data() + pi.offset, static_cast<size_t>(pi.size)};
}

std::span<double> ParameterSet::grad(const std::string& name) {
  return grad(find(name));
}

std::span<const double> ParameterSet::grad(int idx) const {
  const ParamInfo& pi = info_[static_cast<size_t>(idx)];
  return {grads_.data() + pi.offset, static_cast<size_t>(pi.size)};
}

std::span<double> ParameterSet::mutable_flat_values() {
  bump_version();
  return values_;
}

void ParameterSet::zero_grads() {
  std::fill(grads_.begin(), grads_.end(), 0.0);
}

Tensor ParameterSet::value_tensor(int idx) const {
  const ParamInfo& pi = info_[static_cast<size_t>(idx)];
  Tensor t;
  t.shape = pi.shape;
  auto v = value(idx);
  t.data.assign(v.begin(), v.end());
  return t;
}

void ParameterSet::set_value(const std::string& name, const Tensor& t) {
  int idx = find(name);
  const ParamInfo& pi = info_[static_cast<size_t>(idx)];
  if (t.shape != pi.shape)
    throw ConfigError("shape mismatch loading parameter '" + name + "'");
  auto dst = mutable_value(idx);
  std::copy(t.data.begin(), t.data.end(), dst.begin());
}

void GradBuffer::add_to(ParameterSet& ps, double scale) const {
  auto dst = ps.flat_grads();
  if (flat_.size() != dst.size())
    throw ConfigError("gradient buffer layout does not match parameter set");
  for (size_t i = 0; i < flat_.size(); ++i) dst[i] += scale * flat_[i];
}

void init_uniform_fan_in(ParameterSet& ps, const std::string& name, int fan_in,
                         Rng& rng) {
  if (fan_in <= 0) throw ConfigError("fan_in must be positive");
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  auto v = ps.mutable_value(name);
  for (double& x : v) x = rng.uniform(-bound, bound);
}

}  // namespace ranklab
