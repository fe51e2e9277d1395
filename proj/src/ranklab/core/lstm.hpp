#pragma once

#include <span>
#include <string>
#include <vector>

#include "ranklab/core/params.hpp"

namespace ranklab {

class Rng;

// Single-layer LSTM cell.  One weight matrix W of shape [4H x (X+H)] and one
// bias b of shape [4H] cover the four gates in the fixed order
// input, forget, cell, output; the input to the matmul is [x ; h_prev].
struct LstmSpec {
  int input = 0;
  int hidden = 0;
};

void lstm_init(ParameterSet& ps, const std::string& prefix, const LstmSpec& spec,
               Rng& rng);

struct LstmRef {
  LstmSpec spec;
  int w_idx = -1;
  int b_idx = -1;
};

LstmRef lstm_ref(const ParameterSet& ps, const std::string& prefix,
                 const LstmSpec& spec);

// Everything one step's backward pass needs.  A sequence keeps a vector of
// these, one per step.
struct LstmCache {
  std::vector<double> xh;      // [x ; h_prev]
  std::vector<double> i, f, g, o;
  std::vector<double> c_prev, c, tanh_c;
  mutable std::vector<double> dz_scratch, dxh_scratch;
  uint64_t params_version = 0;
};

// h_out/c_out may alias h_prev/c_prev (values are read before writing).
void lstm_step(const ParameterSet& ps, const LstmRef& ref,
               std::span<const double> h_prev, std::span<const double> c_prev,
               std::span<const double> x, std::span<double> h_out,
               std::span<double> c_out, LstmCache& cache);

// Given dL/dh and dL/dc for this step, accumulates parameter gradients into
// gb and writes dL/dh_prev, dL/dc_prev and dL/dx (overwriting; dx may be
// empty if the caller does not need input gradients).
void lstm_backward(const ParameterSet& ps, const LstmRef& ref,
                   const LstmCache& cache, std::span<const double> dh,
                   std::span<const double> dc, std::span<double> dh_prev,
                   std::span<double> dc_prev, std::span<double> dx,
                   GradBuffer& gb);

}  // namespace ranklab
