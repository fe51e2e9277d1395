#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ranklab/core/error.hpp"

namespace ranklab {

// AUC with ties counted 0.5: fraction of (positive, negative) pairs ordered
// correctly.  Returns nullopt when labels are single-class (callers skip
// such lists).  Implemented via average ranks; tests pin it against direct
// pair enumeration.
std::optional<double> auc(std::span<const double> scores,
                          std::span<const int> labels);

struct GaucResult {
  double value = 0.0;
  int lists_used = 0;
  int lists_skipped = 0;
};

// Mean per-list AUC over lists with both label classes present; throws
// DataError when no list qualifies.
GaucResult gauc(const std::vector<std::vector<double>>& scores,
                const std::vector<std::vector<int>>& labels);

// Binary-relevance NDCG of labels in ranked order: gain 2^rel - 1, discount
// log2(position + 1).  Returns nullopt when the list has no positive label.
std::optional<double> ndcg(std::span<const int> ranked_labels);

// Normalized Kendall tau distance between two rankings of the same element
// set: discordant pairs / C(m, 2).  Throws DataError when the element sets
// differ or an input contains duplicates.
template <class T>
double kendall_tau_distance_normalized(const std::vector<T>& a,
                                       const std::vector<T>& b) {
  const size_t m = a.size();
  if (b.size() != m)
    throw DataError("kendall distance over rankings of different sizes");
  if (m < 2) return 0.0;
  std::unordered_map<T, int> pos_a, pos_b;
  for (size_t i = 0; i < m; ++i) {
    if (!pos_a.emplace(a[i], static_cast<int>(i)).second)
      throw DataError("ranking A contains a duplicate element");
    if (!pos_b.emplace(b[i], static_cast<int>(i)).second)
      throw DataError("ranking B contains a duplicate element");
  }
  for (const auto& [elem, _] : pos_a)
    if (!pos_b.count(elem))
      throw DataError("rankings cover different element sets");

  int64_t discordant = 0;
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = i + 1; j < m; ++j) {
      int da = pos_a.at(a[i]) - pos_a.at(a[j]);  // always negative (i < j)
      int db = pos_b.at(a[i]) - pos_b.at(a[j]);
      if (static_cast<int64_t>(da) * db < 0) ++discordant;
    }
  }
  double pairs = 0.5 * static_cast<double>(m) * static_cast<double>(m - 1);
  return static_cast<double>(discordant) / pairs;
}

// Ranking of method names by one metric column: descending value,
// lexicographic tie-break.
std::vector<std::string> rank_methods(const std::vector<std::string>& names,
                                      const std::vector<double>& values);

struct ConsistencyMatrix {
  std::vector<std::string> metric_names;
  std::vector<std::vector<double>> distance;  // [metric][metric], symmetric

  double at(const std::string& a, const std::string& b) const;
};

// Pairwise normalized tau distances between the method rankings induced by
// each metric column.  columns[i] holds one value per method, aligned with
// `methods`.  Throws DataError with fewer than 3 methods.
ConsistencyMatrix consistency_matrix(
    const std::vector<std::string>& methods,
    const std::vector<std::string>& metric_names,
    const std::vector<std::vector<double>>& columns);

}  // namespace ranklab
