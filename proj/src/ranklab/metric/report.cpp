#include "ranklab/metric/report.hpp"

#include <algorithm>

#include "ranklab/core/error.hpp"
#include "ranklab/core/parallel.hpp"
#include "ranklab/core/rng.hpp"

namespace ranklab {

namespace {

// Everything one method needs per list, computed in parallel and reduced in
// list order afterwards.
struct PerList {
  std::vector<double> offline_scores;  // input order
  std::vector<int> offline_labels;
  std::vector<int> ndcg_labels;        // logged labels, reranked order
  std::vector<double> online_scores;   // reranked order
  std::vector<int> online_labels;      // fresh draw on the reranked order
  double evaluator_score = 0.0;
  double true_score = 0.0;
};

}  // namespace

std::vector<MethodReport> evaluate_methods(
    const std::vector<const Ranker*>& methods, const Dataset& test,
    const ItemUniverse& universe, const GroundTruthRule& rule,
    const Evaluator& evaluator, uint64_t seed) {
  if (methods.empty()) throw ConfigError("no methods to evaluate");
  if (test.slates.empty()) throw DataError("empty test set");
  for (const Slate& s : test.slates)
    if (!s.labeled())
      throw DataError("evaluation needs logged purchase labels");

  const int n_lists = static_cast<int>(test.slates.size());
  const uint64_t relabel_base = mix_seed(seed, "relabel");
  std::vector<MethodReport> reports;
  reports.reserve(methods.size());

  std::vector<PerList> rows(static_cast<size_t>(n_lists));
  for (const Ranker* method : methods) {
    parallel_for(n_lists, [&](int64_t i) {
      const Slate& logged = test.slates[static_cast<size_t>(i)];
      PerList& row = rows[static_cast<size_t>(i)];
      const int n = logged.size();

      RankOutput out = method->run(logged, static_cast<int>(i));
      if (static_cast<int>(out.order.size()) != n ||
          static_cast<int>(out.scores.size()) != n)
        throw DataError("method '" + method->name() +
                        "' returned a malformed ranking");

      row.offline_scores = out.scores;
      row.offline_labels = logged.purchase_labels;

      // slot of each reranked item in the logged order
      row.ndcg_labels.resize(static_cast<size_t>(n));
      row.online_scores.resize(static_cast<size_t>(n));
      for (int r = 0; r < n; ++r) {
        const int id = out.order[static_cast<size_t>(r)];
        const auto it = std::find(logged.item_ids.begin(), logged.item_ids.end(), id);
        if (it == logged.item_ids.end())
          throw DataError("method '" + method->name() +
                          "' emitted an item outside the slate");
        const auto slot = static_cast<size_t>(it - logged.item_ids.begin());
        row.ndcg_labels[static_cast<size_t>(r)] = logged.purchase_labels[slot];
        row.online_scores[static_cast<size_t>(r)] = out.scores[slot];
      }

      Slate reranked;
      reranked.item_ids = out.order;
      reranked.bg = logged.bg;
      Rng rng(mix_seed(relabel_base, static_cast<uint64_t>(i)));
      Slate fresh = relabel(rule, universe, reranked, rng);
      row.online_labels = fresh.purchase_labels;

      row.evaluator_score = evaluator.score(universe, reranked).total;
      ScoredList truth = score_list(rule, universe, reranked);
      row.true_score = truth.true_score;
    });

    MethodReport rep;
    rep.method = method->name();

    std::vector<std::vector<double>> offline_scores, online_scores;
    std::vector<std::vector<int>> offline_labels, online_labels;
    offline_scores.reserve(rows.size());
    double ndcg_sum = 0.0, eval_sum = 0.0, true_sum = 0.0;
    for (const PerList& row : rows) {
      offline_scores.push_back(row.offline_scores);
      offline_labels.push_back(row.offline_labels);
      online_scores.push_back(row.online_scores);
      online_labels.push_back(row.online_labels);
      if (auto v = ndcg(row.ndcg_labels)) {
        ndcg_sum += *v;
        ++rep.ndcg_lists_used;
      } else {
        ++rep.ndcg_lists_skipped;
      }
      eval_sum += row.evaluator_score;
      true_sum += row.true_score;
    }
    GaucResult off = gauc(offline_scores, offline_labels);
    rep.offline_gauc = off.value;
    rep.offline_lists_used = off.lists_used;
    rep.offline_lists_skipped = off.lists_skipped;
    GaucResult on = gauc(online_scores, online_labels);
    rep.online_gauc = on.value;
    rep.online_lists_used = on.lists_used;
    rep.online_lists_skipped = on.lists_skipped;
    if (rep.ndcg_lists_used == 0)
      throw DataError("no list with a positive label; NDCG undefined");
    rep.ndcg = ndcg_sum / static_cast<double>(rep.ndcg_lists_used);
    rep.evaluator_score = eval_sum / static_cast<double>(n_lists);
    rep.true_score = true_sum / static_cast<double>(n_lists);
    reports.push_back(std::move(rep));
  }
  return reports;
}

ConsistencyMatrix report_consistency(const std::vector<MethodReport>& reports) {
  std::vector<std::string> methods;
  std::vector<std::vector<double>> columns(5);
  for (const MethodReport& r : reports) {
    methods.push_back(r.method);
    columns[0].push_back(r.offline_gauc);
    columns[1].push_back(r.ndcg);
    columns[2].push_back(r.online_gauc);
    columns[3].push_back(r.evaluator_score);
    columns[4].push_back(r.true_score);
  }
  return consistency_matrix(
      methods, {"offline_gauc", "ndcg", "online_gauc", "evaluator_score", "true_score"},
      columns);
}

}  // namespace ranklab
