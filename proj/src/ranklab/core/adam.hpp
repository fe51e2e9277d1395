#pragma once

#include <cstdint>
#include <vector>

#include "ranklab/core/params.hpp"

namespace ranklab {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a ParameterSet's flat storage.  update()
// consumes the gradients currently held by the set (it does not zero them)
// and throws DivergenceError on non-finite gradients.
class Adam {
 public:
  explicit Adam(const ParameterSet& ps, AdamConfig cfg = {});

  void update(ParameterSet& ps);
  int64_t step() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  int64_t step_ = 0;
};

}  // namespace ranklab
