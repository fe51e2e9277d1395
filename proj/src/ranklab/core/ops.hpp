#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "ranklab/core/error.hpp"

namespace ranklab {

// Probabilities are kept strictly inside (0, 1) so log-losses and their
// gradients stay finite no matter how saturated a model gets.
constexpr double kProbEps = 1e-12;

inline double clamp_prob(double p) {
  return std::clamp(p, kProbEps, 1.0 - kProbEps);
}

// Numerically stable logistic, clamped to (0, 1).
inline double sigmoid(double x) {
  double s;
  if (x >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-x));
  } else {
    double e = std::exp(x);
    s = e / (1.0 + e);
  }
  return clamp_prob(s);
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

// Activation kinds for MLP layers.
enum class Act { none, relu, tanh, sigmoid };

inline double apply_act(Act a, double z) {
  switch (a) {
    case Act::none: return z;
    case Act::relu: return relu(z);
    case Act::tanh: return std::tanh(z);
    case Act::sigmoid: return sigmoid(z);
  }
  return z;
}

// Derivative dy/dz expressed through the already-computed output y.
// (For relu the subgradient at z == 0 is taken as 0.)
inline double act_grad_from_output(Act a, double y) {
  switch (a) {
    case Act::none: return 1.0;
    case Act::relu: return y > 0.0 ? 1.0 : 0.0;
    case Act::tanh: return 1.0 - y * y;
    case Act::sigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

inline Act act_from_string(const std::string& s) {
  if (s == "none" || s == "linear") return Act::none;
  if (s == "relu") return Act::relu;
  if (s == "tanh") return Act::tanh;
  if (s == "sigmoid") return Act::sigmoid;
  throw ConfigError("unknown activation '" + s + "'");
}

inline const char* act_to_string(Act a) {
  switch (a) {
    case Act::none: return "none";
    case Act::relu: return "relu";
    case Act::tanh: return "tanh";
    case Act::sigmoid: return "sigmoid";
  }
  return "none";
}

// max-subtracted softmax, in place; sums to 1 up to rounding.
inline void softmax_inplace(std::span<double> v) {
  if (v.empty()) return;
  double m = v[0];
  for (double x : v) m = std::max(m, x);
  double z = 0.0;
  for (double& x : v) {
    x = std::exp(x - m);
    z += x;
  }
  for (double& x : v) x /= z;
}

inline double log_sum_exp(std::span<const double> v) {
  double m = v[0];
  for (double x : v) m = std::max(m, x);
  double z = 0.0;
  for (double x : v) z += std::exp(x - m);
  return m + std::log(z);
}

// Binary cross-entropy of a probability against a {0,1} target,
// clamped so it is finite even at p in {0,1}.
inline double binary_cross_entropy(double p, double y) {
  p = clamp_prob(p);
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

// d BCE / dp for the clamped loss (gradient of the expression above).
inline double binary_cross_entropy_grad(double p, double y) {
  p = clamp_prob(p);
  return (p - y) / (p * (1.0 - p));
}

}  // namespace ranklab
