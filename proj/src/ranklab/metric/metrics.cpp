#include "ranklab/metric/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ranklab {

std::optional<double> auc(std::span<const double> scores,
                          std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw DataError("auc: score and label lengths differ");
  const int n = static_cast<int>(scores.size());
  int positives = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("auc: labels must be 0 or 1");
    positives += y;
  }
  int negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;

  // Average ranks over tie groups; AUC = (R+ - P(P+1)/2) / (P*Q), which
  // counts ties as half-correct.
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    return scores[static_cast<size_t>(i)] < scores[static_cast<size_t>(j)];
  });
  double rank_sum_pos = 0.0;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j < n && scores[static_cast<size_t>(order[static_cast<size_t>(j)])] ==
                        scores[static_cast<size_t>(order[static_cast<size_t>(i)])])
      ++j;
    double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based mean rank
    for (int k = i; k < j; ++k)
      if (labels[static_cast<size_t>(order[static_cast<size_t>(k)])] == 1)
        rank_sum_pos += avg_rank;
    i = j;
  }
  double p = static_cast<double>(positives), q = static_cast<double>(negatives);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q);
}

GaucResult gauc(const std::vector<std::vector<double>>& scores,
                const std::vector<std::vector<int>>& labels) {
  if (scores.size() != labels.size())
    throw DataError("gauc: list counts differ");
  GaucResult res;
  double sum = 0.0;
  for (size_t l = 0; l < scores.size(); ++l) {
    auto a = auc(scores[l], labels[l]);
    if (a.has_value()) {
      sum += *a;
      ++res.lists_used;
    } else {
      ++res.lists_skipped;
    }
  }
  if (res.lists_used == 0)
    throw DataError("gauc: no list has both label classes");
  res.value = sum / static_cast<double>(res.lists_used);
  return res;
}

std::optional<double> ndcg(std::span<const int> ranked_labels) {
  int positives = 0;
  for (int y : ranked_labels) {
    if (y != 0 && y != 1) throw DataError("ndcg: labels must be 0 or 1");
    positives += y;
  }
  if (positives == 0) return std::nullopt;
  double dcg = 0.0;
  for (size_t i = 0; i < ranked_labels.size(); ++i)
    if (ranked_labels[i] == 1)
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  double idcg = 0.0;
  for (int i = 0; i < positives; ++i)
    idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

std::vector<std::string> rank_methods(const std::vector<std::string>& names,
                                      const std::vector<double>& values) {
  if (names.size() != values.size())
    throw DataError("rank_methods: names and values differ in length");
  std::vector<std::pair<double, std::string>> keyed;
  keyed.reserve(names.size());
  for (size_t i = 0; i < names.size(); ++i) keyed.emplace_back(values[i], names[i]);
  std::sort(keyed.begin(), keyed.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });
  std::vector<std::string> out;
  out.reserve(keyed.size());
  for (auto& [v, n] : keyed) out.push_back(std::move(n));
  return out;
}

double ConsistencyMatrix::at(const std::string& a, const std::string& b) const {
  auto idx = [&](const std::string& n) {
    for (size_t i = 0; i < metric_names.size(); ++i)
      if (metric_names[i] == n) return static_cast<int>(i);
    throw DataError("consistency matrix has no metric '" + n + "'");
  };
  return distance[static_cast<size_t>(idx(a))][static_cast<size_t>(idx(b))];
}

ConsistencyMatrix consistency_matrix(
    const std::vector<std::string>& methods,
    const std::vector<std::string>& metric_names,
    const std::vector<std::vector<double>>& columns) {
  if (methods.size() < 3)
    throw DataError("consistency matrix needs at least 3 methods, got " +
                    std::to_string(methods.size()));
  if (metric_names.size() != columns.size())
    throw DataError("consistency matrix: metric name/column count mismatch");

  std::vector<std::vector<std::string>> rankings;
  rankings.reserve(columns.size());
  for (const auto& col : columns) rankings.push_back(rank_methods(methods, col));

  ConsistencyMatrix cm;
  cm.metric_names = metric_names;
  const size_t k = metric_names.size();
  cm.distance.assign(k, std::vector<double>(k, 0.0));
  for (size_t i = 0; i < k; ++i)
    for (size_t j = i + 1; j < k; ++j) {
      double d = kendall_tau_distance_normalized(rankings[i], rankings[j]);
      cm.distance[i][j] = d;
      cm.distance[j][i] = d;
    }
  return cm;
}

}  // namespace ranklab
