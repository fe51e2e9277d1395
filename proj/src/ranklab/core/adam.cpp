#include "ranklab/core/adam.hpp"

#include <cmath>

#include "ranklab/core/error.hpp"

namespace ranklab {

Adam::Adam(const ParameterSet& ps, AdamConfig cfg)
    : cfg_(cfg),
      m_(static_cast<size_t>(ps.num_scalars()), 0.0),
      v_(static_cast<size_t>(ps.num_scalars()), 0.0) {
  if (cfg_.lr <= 0.0 || cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 ||
      cfg_.beta2 < 0.0 || cfg_.beta2 >= 1.0 || cfg_.eps <= 0.0)
    throw ConfigError("adam hyperparameters out of range");
}

void Adam::update(ParameterSet& ps) {
  auto g = ps.flat_grads();
  if (g.size() != m_.size())
    throw ConfigError("adam state does not match this parameter set");
  for (double gv : g)
    if (!std::isfinite(gv))
      throw DivergenceError("non-finite gradient in adam update " +
                            std::to_string(step_ + 1));

  ++step_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  // bias corrections at this step
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  auto x = ps.mutable_flat_values();
  for (size_t k = 0; k < m_.size(); ++k) {
    m_[k] = b1 * m_[k] + (1.0 - b1) * g[k];
    v_[k] = b2 * v_[k] + (1.0 - b2) * g[k] * g[k];
    double mhat = m_[k] / c1;
    double vhat = v_[k] / c2;
    x[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
  }
}

}  // namespace ranklab
