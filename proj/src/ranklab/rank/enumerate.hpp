#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ranklab/model/evaluator.hpp"
#include "ranklab/sim/rule.hpp"
#include "ranklab/sim/universe.hpp"

namespace ranklab {

// Expected quantile of the best of n independent samples: n / (n + 1).
// The theory column next to measured enumerate-k curves.
double best_of_n_quantile(int n);

struct EnumerateCurvePoint {
  int k = 0;
  double mean_true_score = 0.0;    // simulator score of the chosen order
  double stderr_true_score = 0.0;  // standard error over candidate sets
  double mean_evaluator_score = 0.0;
};

// Measures enumerate-k (best of k sampled orders under the evaluator) for
// every k in `ks` over `num_sets` fresh candidate draws.  Permutation draws
// are nested: the pool for k is the first k of max(ks) shared permutations,
// so each set's chosen score is non-decreasing in k by construction and the
// curve isolates the diminishing-returns effect from sampling noise.
std::vector<EnumerateCurvePoint> enumerate_curve(
    const Evaluator& evaluator, const RuleScorer& truth,
    const ItemUniverse& universe, std::span<const int> ks, int num_sets,
    int list_length, std::span<const double> bg, uint64_t seed);

}  // namespace ranklab
