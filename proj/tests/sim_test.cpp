#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "ranklab/core/error.hpp"
#include "ranklab/core/parallel.hpp"
#include "ranklab/core/rng.hpp"
#include "ranklab/sim/dataset.hpp"
#include "ranklab/sim/rule.hpp"
#include "ranklab/sim/slate.hpp"
#include "ranklab/sim/universe.hpp"

using namespace ranklab;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

// A two-item universe with hand-picked orthogonal features.
ItemUniverse axis_universe() {
  ItemUniverse u;
  u.num_items = 2;
  u.feature_dim = 2;
  u.features = Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0});
  u.seed = 0;
  return u;
}

}  // namespace

TEST_CASE("universe features live in [0,1) and rebuild identically") {
  ItemUniverse a = build_universe(40, 6, 2024);
  ItemUniverse b = build_universe(40, 6, 2024);
  CHECK(a.num_items == 40);
  CHECK(a.feature_dim == 6);
  CHECK(a.features.shape == std::vector<int>{40, 6});
  CHECK(a.features.data == b.features.data);
  for (double v : a.features.data) {
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
  ItemUniverse c = build_universe(40, 6, 2025);
  CHECK(a.features.data != c.features.data);

  std::string path = temp_path("ranklab_universe_test.ckpt");
  save_universe(path, a);
  ItemUniverse back = load_universe(path);
  CHECK(back.num_items == a.num_items);
  CHECK(back.feature_dim == a.feature_dim);
  CHECK(back.seed == a.seed);
  CHECK(back.features.data == a.features.data);
  std::filesystem::remove(path);
}

TEST_CASE("rule alpha schedule is linear from alpha_start to alpha_end") {
  ItemUniverse u = build_universe(30, 5, 1);
  GroundTruthRule rule = build_rule(u, 6, 7);
  REQUIRE(rule.positions() == 6);
  CHECK(rule.alpha.front() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rule.alpha.back() == doctest::Approx(0.4).epsilon(1e-12));
  for (int i = 0; i + 2 < 6; ++i) {
    double d1 = rule.alpha[static_cast<size_t>(i) + 1] - rule.alpha[static_cast<size_t>(i)];
    double d2 = rule.alpha[static_cast<size_t>(i) + 2] - rule.alpha[static_cast<size_t>(i) + 1];
    CHECK(d1 == doctest::Approx(d2).epsilon(1e-9));
    CHECK(d1 < 0.0);
  }

  RuleOptions opts;
  opts.alpha_start = 0.9;
  opts.alpha_end = 0.5;
  GroundTruthRule r2 = build_rule(u, 4, 7, opts);
  CHECK(r2.alpha.front() == doctest::Approx(0.9));
  CHECK(r2.alpha.back() == doctest::Approx(0.5));
}

TEST_CASE("rule recentering hits the target universe-mean base rate") {
  ItemUniverse u = build_universe(300, 8, 3);
  GroundTruthRule rule = build_rule(u, 10, 11);
  double mean = 0.0;
  for (int i = 0; i < u.num_items; ++i) mean += base_rate(rule, u.item(i));
  mean /= u.num_items;
  CHECK(mean == doctest::Approx(0.47).epsilon(0.02));
  for (int i = 0; i < u.num_items; ++i) {
    double r = base_rate(rule, u.item(i));
    CHECK(r > 0.0);
    CHECK(r < 1.0);
  }
}

TEST_CASE("rule round-trips through save and load") {
  ItemUniverse u = build_universe(25, 4, 5);
  GroundTruthRule rule = build_rule(u, 5, 9);
  std::string path = temp_path("ranklab_rule_test.ckpt");
  save_rule(path, rule);
  GroundTruthRule back = load_rule(path);
  CHECK(back.alpha == rule.alpha);
  CHECK(back.mode == rule.mode);
  CHECK(back.seed == rule.seed);
  CHECK(back.recenter_shift == rule.recenter_shift);
  for (int i = 0; i < u.num_items; ++i)
    CHECK(base_rate(back, u.item(i)) == base_rate(rule, u.item(i)));
  std::filesystem::remove(path);
}

TEST_CASE("mutual influence matches the hand-computed cosine cases") {
  ItemUniverse u = axis_universe();
  GroundTruthRule rule = build_rule(u, 4, 1);  // dissimilar mode by default

  std::vector<std::span<const double>> feats{u.item(0), u.item(1)};
  // position 1: inclusive mean is the item itself, cosine 1, g = 0
  CHECK(mutual_influence(rule, feats, 1) == doctest::Approx(0.0).epsilon(1e-12));
  // position 2 with orthogonal unit vectors: cos(e2, (e1+e2)/2) = 1/sqrt(2)
  double expect = 1.0 - 1.0 / std::sqrt(2.0);
  CHECK(mutual_influence(rule, feats, 2) == doctest::Approx(expect).epsilon(1e-12));
  CHECK_THROWS_AS(mutual_influence(rule, feats, 3), DataError);
  CHECK_THROWS_AS(mutual_influence(rule, feats, 0), DataError);

  RuleOptions opts;
  opts.mode = InfluenceMode::similar;
  GroundTruthRule sim_rule = build_rule(u, 4, 1, opts);
  // similar mode maps cosine 1 at position 1 to g = 1
  CHECK(mutual_influence(sim_rule, feats, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mutual_influence(sim_rule, feats, 2) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("influence tracker agrees with the batch mutual_influence") {
  ItemUniverse u = build_universe(12, 5, 8);
  GroundTruthRule rule = build_rule(u, 6, 2);
  std::vector<std::span<const double>> feats;
  for (int i = 0; i < 6; ++i) feats.push_back(u.item(i));

  InfluenceTracker tracker(u.feature_dim, rule.mode);
  for (int pos = 1; pos <= 6; ++pos) {
    double batch = mutual_influence(rule, feats, pos);
    double inc = tracker.g_with(feats[static_cast<size_t>(pos) - 1]);
    CHECK(inc == doctest::Approx(batch).epsilon(1e-12));
    tracker.push(feats[static_cast<size_t>(pos) - 1]);
  }
  CHECK(tracker.count() == 6);
  tracker.reset();
  CHECK(tracker.count() == 0);
}

TEST_CASE("score_list follows the per-position mixing rule") {
  ItemUniverse u = build_universe(30, 5, 4);
  GroundTruthRule rule = build_rule(u, 5, 6);
  Slate s;
  s.item_ids = {3, 17, 9, 22, 11};
  s.bg = constant_bg(4);

  ScoredList out = score_list(rule, u, s);
  REQUIRE(out.f.size() == 5);
  // alpha_1 = 1 means position 1 is the pure base rate
  CHECK(out.f[0] == doctest::Approx(base_rate(rule, u.item(3))).epsilon(1e-12));
  double sum = 0.0;
  std::vector<std::span<const double>> feats;
  for (int id : s.item_ids) feats.push_back(u.item(id));
  for (int i = 0; i < 5; ++i) {
    double a = rule.alpha[static_cast<size_t>(i)];
    double expect = a * base_rate(rule, u.item(s.item_ids[static_cast<size_t>(i)])) +
                    (1.0 - a) * mutual_influence(rule, feats, i + 1);
    CHECK(out.f[static_cast<size_t>(i)] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(out.f[static_cast<size_t>(i)] >= 0.0);
    CHECK(out.f[static_cast<size_t>(i)] <= 1.0);
    sum += out.f[static_cast<size_t>(i)];
  }
  CHECK(out.true_score == doctest::Approx(sum).epsilon(1e-12));

  // the rule is order sensitive
  Slate rev = s;
  std::reverse(rev.item_ids.begin(), rev.item_ids.end());
  ScoredList out_rev = score_list(rule, u, rev);
  CHECK(out.true_score != out_rev.true_score);

  Slate too_long;
  too_long.item_ids = {0, 1, 2, 3, 4, 5};
  too_long.bg = constant_bg(4);
  CHECK_THROWS_AS(score_list(rule, u, too_long), ConfigError);
}

TEST_CASE("rule scorer caches base rates without changing results") {
  ItemUniverse u = build_universe(20, 4, 12);
  GroundTruthRule rule = build_rule(u, 4, 13);
  RuleScorer scorer(rule, u);
  Slate s;
  s.item_ids = {1, 7, 13, 19};
  s.bg = constant_bg(4);
  ScoredList direct = score_list(rule, u, s);
  ScoredList cached = scorer.score(s.item_ids);
  CHECK(cached.true_score == doctest::Approx(direct.true_score).epsilon(1e-12));
  for (int i = 0; i < 4; ++i)
    CHECK(cached.f[static_cast<size_t>(i)] ==
          doctest::Approx(direct.f[static_cast<size_t>(i)]).epsilon(1e-12));
  CHECK(scorer.rate(7) == doctest::Approx(base_rate(rule, u.item(7))).epsilon(1e-12));
  CHECK(scorer.true_score(s.item_ids) == cached.true_score);
}

TEST_CASE("validate_slate rejects malformed slates") {
  ItemUniverse u = build_universe(10, 3, 1);
  Slate ok;
  ok.item_ids = {0, 5, 9};
  ok.bg = constant_bg(4);
  CHECK_NOTHROW(validate_slate(ok, u));

  Slate dup = ok;
  dup.item_ids = {0, 5, 5};
  CHECK_THROWS_AS(validate_slate(dup, u), DataError);

  Slate oob = ok;
  oob.item_ids = {0, 5, 10};
  CHECK_THROWS_AS(validate_slate(oob, u), DataError);

  Slate bad_labels = ok;
  bad_labels.purchase_labels = {1, 0};  // wrong length
  CHECK_THROWS_AS(validate_slate(bad_labels, u), DataError);
}

TEST_CASE("sampled labels match the rule probabilities in the long run") {
  ItemUniverse u = build_universe(30, 5, 21);
  GroundTruthRule rule = build_rule(u, 4, 22);
  Slate s;
  s.item_ids = {2, 9, 16, 23};
  s.bg = constant_bg(4);
  ScoredList truth = score_list(rule, u, s);

  const int draws = 20000;
  std::vector<double> purchase_rate(4, 0.0), click_rate(4, 0.0);
  Rng rng(77);
  for (int rep = 0; rep < draws; ++rep) {
    SampledLabels lab = sample_labels(rule, u, s, rng);
    REQUIRE(lab.purchase.size() == 4);
    REQUIRE(lab.click.size() == 4);
    for (int i = 0; i < 4; ++i) {
      purchase_rate[static_cast<size_t>(i)] += lab.purchase[static_cast<size_t>(i)];
      click_rate[static_cast<size_t>(i)] += lab.click[static_cast<size_t>(i)];
    }
  }
  for (int i = 0; i < 4; ++i) {
    double f = truth.f[static_cast<size_t>(i)];
    double p_hat = purchase_rate[static_cast<size_t>(i)] / draws;
    double c_hat = click_rate[static_cast<size_t>(i)] / draws;
    double se_p = std::sqrt(f * (1 - f) / draws);
    double se_c = std::sqrt(std::sqrt(f) * (1 - std::sqrt(f)) / draws);
    CHECK(std::fabs(p_hat - f) < 4.0 * se_p + 1e-9);
    CHECK(std::fabs(c_hat - std::sqrt(f)) < 4.0 * se_c + 1e-9);
  }
}

TEST_CASE("relabel keeps the order and redraws the labels") {
  ItemUniverse u = build_universe(20, 4, 31);
  GroundTruthRule rule = build_rule(u, 4, 32);
  Slate s;
  s.item_ids = {1, 6, 11, 16};
  s.bg = constant_bg(4);
  Rng rng(5);
  Slate fresh = relabel(rule, u, s, rng);
  CHECK(fresh.item_ids == s.item_ids);
  CHECK(fresh.bg == s.bg);
  CHECK(fresh.labeled());
  CHECK(fresh.purchase_labels.size() == 4);
  CHECK(fresh.click_labels.size() == 4);
  for (int y : fresh.purchase_labels) CHECK((y == 0 || y == 1));
}

TEST_CASE("generate_dataset splits, labels and reproduces deterministically") {
  ItemUniverse u = build_universe(40, 5, 41);
  GroundTruthRule rule = build_rule(u, 4, 42);
  GenerateOptions opts;
  opts.num_lists = 50;
  opts.list_length = 4;
  opts.train_fraction = 0.8;
  opts.bg_dim = 3;

  auto [train, test] = generate_dataset(u, rule, opts, 99);
  CHECK(train.size() == 40);
  CHECK(test.size() == 10);
  CHECK(train.split == "train");
  CHECK(test.split == "test");
  CHECK(train.list_length == 4);
  CHECK(train.bg_dim == 3);
  CHECK(train.num_items == 40);
  CHECK(train.feature_dim == 5);

  for (const Slate& s : train.slates) {
    CHECK(s.size() == 4);
    CHECK(s.labeled());
    CHECK(s.bg.size() == 3);
    std::set<int> ids(s.item_ids.begin(), s.item_ids.end());
    CHECK(ids.size() == 4);
    CHECK_NOTHROW(validate_slate(s, u));
  }

  auto [train2, test2] = generate_dataset(u, rule, opts, 99);
  for (int i = 0; i < train.size(); ++i) {
    CHECK(train.slates[static_cast<size_t>(i)].item_ids ==
          train2.slates[static_cast<size_t>(i)].item_ids);
    CHECK(train.slates[static_cast<size_t>(i)].purchase_labels ==
          train2.slates[static_cast<size_t>(i)].purchase_labels);
  }

  // per-list streams: results are invariant to the thread cap
  set_max_threads(4);
  auto [train3, test3] = generate_dataset(u, rule, opts, 99);
  set_max_threads(0);
  for (int i = 0; i < train.size(); ++i)
    CHECK(train.slates[static_cast<size_t>(i)].click_labels ==
          train3.slates[static_cast<size_t>(i)].click_labels);

  auto [zero_train, zero_test] =
      generate_dataset(u, rule, GenerateOptions{0, 4, 0.8, 3}, 99);
  CHECK(zero_train.size() == 0);
  CHECK(zero_test.size() == 0);
}

TEST_CASE("dataset save/load round-trips and rewrites byte-identically") {
  ItemUniverse u = build_universe(30, 4, 51);
  GroundTruthRule rule = build_rule(u, 3, 52);
  auto [train, test] = generate_dataset(u, rule, GenerateOptions{20, 3, 0.75, 2}, 7);

  std::string path = temp_path("ranklab_dataset_test.txt");
  save_dataset(path, train);
  std::string bytes1 = file_bytes(path);
  Dataset back = load_dataset(path);
  CHECK(back.split == train.split);
  CHECK(back.size() == train.size());
  CHECK(back.list_length == train.list_length);
  CHECK(back.num_items == train.num_items);
  CHECK(back.feature_dim == train.feature_dim);
  CHECK(back.bg_dim == train.bg_dim);
  CHECK(back.universe_seed == train.universe_seed);
  CHECK(back.rule_seed == train.rule_seed);
  CHECK(back.generation_seed == train.generation_seed);
  for (int i = 0; i < train.size(); ++i) {
    CHECK(back.slates[static_cast<size_t>(i)].item_ids ==
          train.slates[static_cast<size_t>(i)].item_ids);
    CHECK(back.slates[static_cast<size_t>(i)].purchase_labels ==
          train.slates[static_cast<size_t>(i)].purchase_labels);
    CHECK(back.slates[static_cast<size_t>(i)].click_labels ==
          train.slates[static_cast<size_t>(i)].click_labels);
    CHECK(back.slates[static_cast<size_t>(i)].bg ==
          train.slates[static_cast<size_t>(i)].bg);
  }
  save_dataset(path, back);
  CHECK(file_bytes(path) == bytes1);
  std::filesystem::remove(path);
}

TEST_CASE("position profile averages the per-position true rates") {
  ItemUniverse u = build_universe(25, 4, 61);
  GroundTruthRule rule = build_rule(u, 4, 62);
  auto [train, test] = generate_dataset(u, rule, GenerateOptions{30, 4, 1.0, 2}, 8);

  std::vector<double> profile = position_profile(train, rule, u);
  REQUIRE(profile.size() == 4);
  std::vector<double> expect(4, 0.0);
  for (const Slate& s : train.slates) {
    ScoredList sl = score_list(rule, u, s);
    for (int i = 0; i < 4; ++i) expect[static_cast<size_t>(i)] += sl.f[static_cast<size_t>(i)];
  }
  for (int i = 0; i < 4; ++i)
    CHECK(profile[static_cast<size_t>(i)] ==
          doctest::Approx(expect[static_cast<size_t>(i)] / train.size()).epsilon(1e-12));
}
