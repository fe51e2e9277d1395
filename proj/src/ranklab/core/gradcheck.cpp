#include "ranklab/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ranklab/core/error.hpp"
#include "ranklab/core/rng.hpp"

namespace ranklab {

GradCheckResult grad_check(const std::function<double()>& loss,
                           ParameterSet& ps, double eps, int max_coords,
                           uint64_t seed) {
  if (eps <= 0.0) throw ConfigError("grad_check eps must be positive");
  const int64_t n = ps.num_scalars();
  if (n == 0) throw ConfigError("grad_check on an empty parameter set");

  // Snapshot the analytic gradients before our perturbed forwards touch
  // anything.
  std::vector<double> analytic(ps.flat_grads().begin(), ps.flat_grads().end());

  std::vector<int64_t> coords;
  if (n <= max_coords) {
    coords.resize(static_cast<size_t>(n));
    for (int64_t k = 0; k < n; ++k) coords[static_cast<size_t>(k)] = k;
  } else {
    Rng rng(mix_seed(seed, "grad_check"));
    coords.reserve(static_cast<size_t>(max_coords));
    for (int i = 0; i < max_coords; ++i)
      coords.push_back(static_cast<int64_t>(rng.u64() % static_cast<uint64_t>(n)));
  }

  GradCheckResult res;
  for (int64_t k : coords) {
    auto x = ps.mutable_flat_values();
    const double saved = x[static_cast<size_t>(k)];
    x[static_cast<size_t>(k)] = saved + eps;
    double fp = loss();
    ps.mutable_flat_values()[static_cast<size_t>(k)] = saved - eps;
    double fm = loss();
    ps.mutable_flat_values()[static_cast<size_t>(k)] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw DivergenceError("non-finite loss while probing coordinate " +
                            std::to_string(k));
    double numeric = (fp - fm) / (2.0 * eps);
    double a = analytic[static_cast<size_t>(k)];
    double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    if (rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_coord = static_cast<int>(k);
    }
    ++res.coords_checked;
  }
  return res;
}

}  // namespace ranklab
