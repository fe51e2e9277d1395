#pragma once

#include <cstdint>
#include <vector>

namespace ranklab {

// Dense rectangular array of doubles with an explicit shape; row-major
// storage.  This is the data currency at module boundaries (checkpoints,
// universe features, logged slates); hot loops work on raw spans.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<double> d);

  static Tensor zeros(std::vector<int> shape);
  static Tensor scalar(double v);

  int64_t numel() const;
  int rank() const { return static_cast<int>(shape.size()); }

  // 2-D accessors (checked in debug builds only).
  double& at(int i, int j);
  double at(int i, int j) const;
  const double* row(int i) const;
  double* row(int i);

  bool all_finite() const;
};

// numel implied by a shape vector; 1 for a rank-0 tensor.
int64_t shape_numel(const std::vector<int>& shape);

}  // namespace ranklab
