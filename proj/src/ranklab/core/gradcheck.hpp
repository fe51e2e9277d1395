#pragma once

#include <cstdint>
#include <functional>

#include "ranklab/core/params.hpp"

namespace ranklab {

struct GradCheckResult {
  double max_rel_error = 0.0;
  int worst_coord = -1;       // flat index of the worst coordinate
  int coords_checked = 0;
};

// Central-difference gradient verification.
//
// Protocol: the caller computes the loss once with backward enabled so the
// set's gradients hold d(loss)/d(theta), then calls grad_check with a
// `loss` closure that re-evaluates the same scalar loss (forward only) under
// the current parameter values.  For up to max_coords coordinates (all of
// them if the set is small, otherwise a seeded uniform sample) the checker
// perturbs theta_k by +/-eps, forms (f+ - f-) / (2 eps) and compares with the
// stored analytic gradient via
//
//   rel_err = |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
//
// Values are restored exactly afterwards (the version counter will have
// advanced).  Throws DivergenceError if the loss comes back non-finite.
GradCheckResult grad_check(const std::function<double()>& loss,
                           ParameterSet& ps, double eps = 1e-5,
                           int max_coords = 200, uint64_t seed = 0);

}  // namespace ranklab
