#include "ranklab/core/tensor.hpp"

#include <cassert>
#include <cmath>

#include "ranklab/core/error.hpp"

namespace ranklab {

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ConfigError("tensor shape has a negative dimension");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw ConfigError("tensor data size does not match its shape");
}

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  int64_t n = shape_numel(shape);
  t.shape = std::move(shape);
  t.data.assign(static_cast<size_t>(n), 0.0);
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data.assign(1, v);
  return t;
}

int64_t Tensor::numel() const { return static_cast<int64_t>(data.size()); }

double& Tensor::at(int i, int j) {
  assert(rank() == 2 && i >= 0 && i < shape[0] && j >= 0 && j < shape[1]);
  return data[static_cast<size_t>(i) * shape[1] + j];
}

double Tensor::at(int i, int j) const {
  assert(rank() == 2 && i >= 0 && i < shape[0] && j >= 0 && j < shape[1]);
  return data[static_cast<size_t>(i) * shape[1] + j];
}

const double* Tensor::row(int i) const {
  assert(rank() == 2 && i >= 0 && i < shape[0]);
  return data.data() + static_cast<size_t>(i) * shape[1];
}

double* Tensor::row(int i) {
  assert(rank() == 2 && i >= 0 && i < shape[0]);
  return data.data() + static_cast<size_t>(i) * shape[1];
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace ranklab
