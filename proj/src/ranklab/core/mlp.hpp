#pragma once

#include <span>
#include <string>
#include <vector>

#include "ranklab/core/ops.hpp"
#include "ranklab/core/params.hpp"

namespace ranklab {

class Rng;

// Fully-connected feed-forward network.  widths[0] is the input width and
// each later entry one layer's output width; `hidden` activates every layer
// except the last, which uses `output`.
struct MlpSpec {
  std::vector<int> widths;
  Act hidden = Act::relu;
  Act output = Act::none;

  MlpSpec() = default;
  MlpSpec(std::vector<int> w, Act h, Act o) : widths(std::move(w)), hidden(h), output(o) {}
  // Uniform activation on every layer, matching the single-activation
  // convenience entry points below.
  MlpSpec(std::vector<int> w, Act a) : widths(std::move(w)), hidden(a), output(a) {}

  int layers() const { return static_cast<int>(widths.size()) - 1; }
  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
};

// Registers `prefix/W<l>` and `prefix/b<l>` for every layer: weights get a
// fan-in scaled uniform init, biases start at zero.
void mlp_init(ParameterSet& ps, const std::string& prefix, const MlpSpec& spec,
              Rng& rng);

// Pre-resolved parameter indices so hot loops skip name lookups.
struct MlpRef {
  MlpSpec spec;
  std::vector<int> w_idx;
  std::vector<int> b_idx;
};

MlpRef mlp_ref(const ParameterSet& ps, const std::string& prefix,
               const MlpSpec& spec);

// Forward activations for one input, reused across calls to avoid
// reallocation.  `params_version` ties the cache to the parameter state it
// was computed under.
struct MlpCache {
  std::vector<std::vector<double>> x;  // x[l] = input of layer l; x[L] = output
  mutable std::vector<std::vector<double>> dbuf;  // backward scratch
  uint64_t params_version = 0;
};

// out must have spec.output_width() elements.
void mlp_forward(const ParameterSet& ps, const MlpRef& ref,
                 std::span<const double> in, std::span<double> out,
                 MlpCache& cache);

// Accumulates parameter gradients into `gb` and, if dinput is non-empty,
// writes d(loss)/d(input) there (overwriting).  Throws StaleCacheError if the
// parameters changed since the cache was filled.
void mlp_backward(const ParameterSet& ps, const MlpRef& ref,
                  const MlpCache& cache, std::span<const double> dout,
                  std::span<double> dinput, GradBuffer& gb);

// Name-based convenience wrappers (tests, one-off scoring).
std::vector<double> mlp_forward(const ParameterSet& ps, const std::string& prefix,
                                const MlpSpec& spec, std::span<const double> in);

}  // namespace ranklab
