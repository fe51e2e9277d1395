#include "ranklab/rank/enumerate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ranklab/core/error.hpp"
#include "ranklab/core/parallel.hpp"
#include "ranklab/core/rng.hpp"

namespace ranklab {

double best_of_n_quantile(int n) {
  if (n < 1) throw ConfigError("best-of-n quantile needs n >= 1");
  return static_cast<double>(n) / static_cast<double>(n + 1);
}

std::vector<EnumerateCurvePoint> enumerate_curve(
    const Evaluator& evaluator, const RuleScorer& truth,
    const ItemUniverse& universe, std::span<const int> ks, int num_sets,
    int list_length, std::span<const double> bg, uint64_t seed) {
  if (ks.empty()) throw ConfigError("enumerate curve needs at least one k");
  for (int k : ks)
    if (k <= 0) throw ConfigError("enumerate curve needs k > 0");
  if (num_sets <= 0) throw ConfigError("enumerate curve needs candidate sets");
  if (list_length <= 0 || list_length > universe.num_items)
    throw ConfigError("list_length " + std::to_string(list_length) +
                      " does not fit a universe of " +
                      std::to_string(universe.num_items) + " items");

  std::vector<int> sorted_ks(ks.begin(), ks.end());
  std::sort(sorted_ks.begin(), sorted_ks.end());
  sorted_ks.erase(std::unique(sorted_ks.begin(), sorted_ks.end()),
                  sorted_ks.end());
  const int max_k = sorted_ks.back();
  const size_t n_ks = sorted_ks.size();

  // Per (set, k): true and evaluator score of the order chosen by
  // enumerate-k over that set's shared permutation pool.
  std::vector<std::vector<double>> true_scores(
      n_ks, std::vector<double>(static_cast<size_t>(num_sets), 0.0));
  std::vector<std::vector<double>> eval_scores(
      n_ks, std::vector<double>(static_cast<size_t>(num_sets), 0.0));

  const uint64_t base = mix_seed(seed, "enumerate-curve");
  parallel_for(num_sets, [&](int64_t c) {
    Rng rng(mix_seed(base, static_cast<uint64_t>(c)));
    std::vector<int> cands = sample_distinct(universe.num_items, list_length, rng);

    EvaluatorScorer scorer(evaluator, universe);
    scorer.begin(cands, bg);

    std::vector<int> perm(static_cast<size_t>(list_length));
    std::vector<int> best_perm;
    double best_eval = -std::numeric_limits<double>::infinity();
    size_t next_k = 0;
    for (int j = 1; j <= max_k; ++j) {
      std::iota(perm.begin(), perm.end(), 0);
      shuffle(perm, rng);
      EvaluatorScorer::State st = scorer.initial_state();
      double total = 0.0;
      for (int slot : perm) total += scorer.step(st, slot);
      if (total > best_eval) {
        best_eval = total;
        best_perm = perm;
      }
      while (next_k < n_ks && sorted_ks[next_k] == j) {
        std::vector<int> order(best_perm.size());
        for (size_t r = 0; r < best_perm.size(); ++r)
          order[r] = cands[static_cast<size_t>(best_perm[r])];
        true_scores[next_k][static_cast<size_t>(c)] = truth.true_score(order);
        eval_scores[next_k][static_cast<size_t>(c)] = best_eval;
        ++next_k;
      }
    }
  });

  std::vector<EnumerateCurvePoint> curve(n_ks);
  for (size_t i = 0; i < n_ks; ++i) {
    EnumerateCurvePoint& pt = curve[i];
    pt.k = sorted_ks[i];
    double sum = 0.0, sum_sq = 0.0, esum = 0.0;
    for (int c = 0; c < num_sets; ++c) {
      sum += true_scores[i][static_cast<size_t>(c)];
      sum_sq += true_scores[i][static_cast<size_t>(c)] *
                true_scores[i][static_cast<size_t>(c)];
      esum += eval_scores[i][static_cast<size_t>(c)];
    }
    const double mean = sum / static_cast<double>(num_sets);
    pt.mean_true_score = mean;
    pt.mean_evaluator_score = esum / static_cast<double>(num_sets);
    if (num_sets > 1) {
      const double var = std::max(
          0.0, (sum_sq - static_cast<double>(num_sets) * mean * mean) /
                   static_cast<double>(num_sets - 1));
      pt.stderr_true_score = std::sqrt(var / static_cast<double>(num_sets));
    }
  }
  return curve;
}

}  // namespace ranklab
