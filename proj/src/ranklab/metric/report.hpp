#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ranklab/metric/metrics.hpp"
#include "ranklab/model/evaluator.hpp"
#include "ranklab/rank/rankers.hpp"
#include "ranklab/sim/dataset.hpp"
#include "ranklab/sim/rule.hpp"
#include "ranklab/sim/universe.hpp"

namespace ranklab {

// One method's offline and online numbers over a test set.
//
//   offline_gauc    method scores vs the logged purchase labels
//   ndcg            logged labels read in the method's new order
//   online_gauc     method scores vs fresh labels drawn on the new order
//   evaluator_score mean evaluator list score of the new orders
//   true_score      mean simulator list score of the new orders
//
// The first two only see logged data (what production offline evaluation
// can measure); the last three need the simulator or the evaluator (what
// only an online test - or a model of it - can measure).
struct MethodReport {
  std::string method;
  double offline_gauc = 0.0;
  int offline_lists_used = 0;
  int offline_lists_skipped = 0;
  double ndcg = 0.0;
  int ndcg_lists_used = 0;
  int ndcg_lists_skipped = 0;
  double online_gauc = 0.0;
  int online_lists_used = 0;
  int online_lists_skipped = 0;
  double evaluator_score = 0.0;
  double true_score = 0.0;
};

// Runs every method over the test slates.  Fresh online labels for list i
// derive from (seed, i) only, so two methods producing the same order see
// the same user randomness (paired comparison).
std::vector<MethodReport> evaluate_methods(
    const std::vector<const Ranker*>& methods, const Dataset& test,
    const ItemUniverse& universe, const GroundTruthRule& rule,
    const Evaluator& evaluator, uint64_t seed);

// Consistency matrix over the report's metric columns: how differently each
// pair of metrics ranks the methods (normalized Kendall tau distance).
ConsistencyMatrix report_consistency(const std::vector<MethodReport>& reports);

}  // namespace ranklab
