#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "ranklab/core/error.hpp"
#include "ranklab/core/rng.hpp"
#include "ranklab/metric/metrics.hpp"

using namespace ranklab;

namespace {

// Direct pairwise AUC: fraction of (positive, negative) pairs with the
// positive scored higher, ties counting one half.
std::optional<double> auc_by_pairs(const std::vector<double>& scores,
                                   const std::vector<int>& labels) {
  double wins = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1) continue;
    for (size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  if (pairs == 0) return std::nullopt;
  return wins / static_cast<double>(pairs);
}

double dcg_of(const std::vector<int>& rels) {
  double s = 0.0;
  for (size_t i = 0; i < rels.size(); ++i)
    s += (std::pow(2.0, rels[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  return s;
}

// Exhaustive maximum DCG over every permutation of the labels.
double max_dcg_brute(std::vector<int> rels) {
  std::sort(rels.begin(), rels.end());
  double best = -1.0;
  do {
    best = std::max(best, dcg_of(rels));
  } while (std::next_permutation(rels.begin(), rels.end()));
  return best;
}

int64_t discordant_brute(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> pos_b(a.size());
  for (size_t i = 0; i < b.size(); ++i) pos_b[static_cast<size_t>(b[i])] = static_cast<int>(i);
  int64_t d = 0;
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = i + 1; j < a.size(); ++j)
      if (pos_b[static_cast<size_t>(a[i])] > pos_b[static_cast<size_t>(a[j])]) ++d;
  return d;
}

}  // namespace

TEST_CASE("auc hand cases") {
  std::vector<double> s{0.9, 0.8, 0.2, 0.1};
  std::vector<int> perfect{1, 1, 0, 0};
  CHECK(auc(s, perfect).value() == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<int> inverted{0, 0, 1, 1};
  CHECK(auc(s, inverted).value() == doctest::Approx(0.0).epsilon(1e-12));

  std::vector<double> tied{0.5, 0.5, 0.5};
  std::vector<int> lab{1, 0, 0};
  CHECK(auc(tied, lab).value() == doctest::Approx(0.5).epsilon(1e-12));

  std::vector<int> ones{1, 1, 1};
  CHECK_FALSE(auc(tied, ones).has_value());
  std::vector<int> zeros{0, 0, 0};
  CHECK_FALSE(auc(tied, zeros).has_value());
}

TEST_CASE("auc matches pair enumeration on random fixtures with heavy ties") {
  Rng rng(404);
  int compared = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    int n = 2 + rng.index(7);  // lengths 2..8
    std::vector<double> scores(static_cast<size_t>(n));
    std::vector<int> labels(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      scores[static_cast<size_t>(i)] = 0.25 * rng.index(5);  // deliberate ties
      labels[static_cast<size_t>(i)] = rng.index(2);
    }
    auto expect = auc_by_pairs(scores, labels);
    auto got = auc(scores, labels);
    CHECK(expect.has_value() == got.has_value());
    if (expect) {
      CHECK(got.value() == doctest::Approx(expect.value()).epsilon(1e-12));
      ++compared;
    }
  }
  CHECK(compared > 500);
}

TEST_CASE("gauc averages per-list auc and skips single-class lists") {
  std::vector<std::vector<double>> scores{
      {0.9, 0.1}, {0.2, 0.8}, {0.5, 0.6}};
  std::vector<std::vector<int>> labels{
      {1, 0},     // auc 1
      {1, 0},     // auc 0
      {1, 1}};    // skipped
  GaucResult g = gauc(scores, labels);
  CHECK(g.lists_used == 2);
  CHECK(g.lists_skipped == 1);
  CHECK(g.value == doctest::Approx(0.5).epsilon(1e-12));

  std::vector<std::vector<int>> all_same{{1, 1}, {0, 0}};
  std::vector<std::vector<double>> s2{{0.1, 0.2}, {0.3, 0.4}};
  CHECK_THROWS_AS(gauc(s2, all_same), DataError);
}

TEST_CASE("ndcg hand case and permutation-maximum property") {
  std::vector<int> ranked{1, 0, 1};
  double dcg = 1.0 + 0.0 + 1.0 / std::log2(4.0);
  double ideal = 1.0 + 1.0 / std::log2(3.0);
  CHECK(ndcg(ranked).value() == doctest::Approx(dcg / ideal).epsilon(1e-12));

  std::vector<int> no_pos{0, 0, 0};
  CHECK_FALSE(ndcg(no_pos).has_value());
  std::vector<int> best_first{1, 1, 0};
  CHECK(ndcg(best_first).value() == doctest::Approx(1.0).epsilon(1e-12));

  Rng rng(505);
  int with_pos = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    int n = 1 + rng.index(8);  // lengths 1..8
    std::vector<int> rels(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) rels[static_cast<size_t>(i)] = rng.index(2);
    auto got = ndcg(rels);
    bool any = std::any_of(rels.begin(), rels.end(), [](int r) { return r > 0; });
    CHECK(got.has_value() == any);
    if (!any) continue;
    ++with_pos;
    // oracle: numerator over the exhaustive permutation maximum
    double expect = dcg_of(rels) / max_dcg_brute(rels);
    CHECK(got.value() == doctest::Approx(expect).epsilon(1e-12));
    CHECK(got.value() <= 1.0 + 1e-12);
    CHECK(got.value() >= 0.0);
  }
  CHECK(with_pos > 500);
}

TEST_CASE("kendall distance equals brute-force discordant counting") {
  std::vector<int> id{0, 1, 2, 3};
  CHECK(kendall_tau_distance_normalized(id, id) == 0.0);
  std::vector<int> rev{3, 2, 1, 0};
  CHECK(kendall_tau_distance_normalized(id, rev) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<int> one_swap{1, 0, 2, 3};
  CHECK(kendall_tau_distance_normalized(id, one_swap) ==
        doctest::Approx(1.0 / 6.0).epsilon(1e-12));

  Rng rng(606);
  for (int rep = 0; rep < 1000; ++rep) {
    int n = 2 + rng.index(7);
    std::vector<int> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), 0);
    shuffle(a, rng);
    shuffle(b, rng);
    double pairs = 0.5 * n * (n - 1);
    double expect = static_cast<double>(discordant_brute(a, b)) / pairs;
    double got = kendall_tau_distance_normalized(a, b);
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    // symmetry
    CHECK(kendall_tau_distance_normalized(b, a) == doctest::Approx(got).epsilon(1e-12));
  }

  std::vector<int> dup{0, 0, 1};
  std::vector<int> other{0, 1, 2};
  CHECK_THROWS_AS(kendall_tau_distance_normalized(dup, other), DataError);
  CHECK_THROWS_AS(kendall_tau_distance_normalized(other, dup), DataError);
  std::vector<int> different{4, 5, 6};
  CHECK_THROWS_AS(kendall_tau_distance_normalized(other, different), DataError);
  std::vector<int> shorter{0, 1};
  CHECK_THROWS_AS(kendall_tau_distance_normalized(other, shorter), DataError);
  std::vector<int> single{7};
  CHECK(kendall_tau_distance_normalized(single, single) == 0.0);
}

TEST_CASE("rank_methods sorts descending with lexicographic tie-break") {
  std::vector<std::string> names{"charlie", "alpha", "bravo"};
  std::vector<double> values{0.5, 0.9, 0.5};
  auto ranked = rank_methods(names, values);
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0] == "alpha");
  CHECK(ranked[1] == "bravo");    // ties broken by name
  CHECK(ranked[2] == "charlie");
}

TEST_CASE("consistency matrix reflects ranking agreement between metrics") {
  std::vector<std::string> methods{"a", "b", "c"};
  std::vector<std::string> metric_names{"m1", "m2", "m3"};
  // m1 and m2 rank identically; m3 ranks in the exact opposite order
  std::vector<std::vector<double>> cols{
      {3.0, 2.0, 1.0}, {30.0, 20.0, 10.0}, {1.0, 2.0, 3.0}};
  ConsistencyMatrix m = consistency_matrix(methods, metric_names, cols);
  CHECK(m.metric_names == metric_names);
  CHECK(m.at("m1", "m1") == 0.0);
  CHECK(m.at("m1", "m2") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(m.at("m1", "m3") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.at("m3", "m1") == m.at("m1", "m3"));  // symmetric
  CHECK_THROWS_AS(m.at("m1", "zzz"), DataError);

  std::vector<std::string> two{"a", "b"};
  std::vector<std::vector<double>> two_cols{{1.0, 2.0}, {2.0, 1.0}, {1.0, 2.0}};
  CHECK_THROWS_AS(consistency_matrix(two, metric_names, two_cols), DataError);
}
