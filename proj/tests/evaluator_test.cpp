#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "ranklab/core/error.hpp"
#include "ranklab/core/gradcheck.hpp"
#include "ranklab/core/parallel.hpp"
#include "ranklab/core/rng.hpp"
#include "ranklab/model/evaluator.hpp"
#include "ranklab/sim/dataset.hpp"

using namespace ranklab;

namespace {

struct TinyWorld {
  ItemUniverse universe;
  GroundTruthRule rule;
  Dataset train, test;

  TinyWorld() {
    universe = build_universe(20, 4, 100);
    rule = build_rule(universe, 4, 101);
    auto pair = generate_dataset(universe, rule, GenerateOptions{120, 4, 0.75, 2}, 102);
    train = pair.first;
    test = pair.second;
  }
};

EvaluatorConfig tiny_config() {
  EvaluatorConfig cfg;
  cfg.feature_dim = 4;
  cfg.bg_dim = 2;
  cfg.enc_widths = {8, 6};
  cfg.hidden = 6;
  cfg.head_widths = {6};
  cfg.batch_lists = 16;
  cfg.max_epochs = 2;
  cfg.patience = 2;
  return cfg;
}

}  // namespace

TEST_CASE("evaluator scores are probabilities and the list score is their sum") {
  TinyWorld w;
  Evaluator ev(tiny_config(), 7);
  const Slate& s = w.test.slates.front();
  ListScore ls = ev.score(w.universe, s);
  REQUIRE(ls.p.size() == 4);
  REQUIRE(ls.p_click.size() == 4);
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    CHECK(ls.p[static_cast<size_t>(i)] > 0.0);
    CHECK(ls.p[static_cast<size_t>(i)] < 1.0);
    CHECK(ls.p_click[static_cast<size_t>(i)] > 0.0);
    CHECK(ls.p_click[static_cast<size_t>(i)] < 1.0);
    sum += ls.p[static_cast<size_t>(i)];
  }
  CHECK(ls.total == doctest::Approx(sum).epsilon(1e-12));
  CHECK(ev.list_score(w.universe, s) == ls.total);
}

TEST_CASE("evaluator construction is seed-deterministic") {
  Evaluator a(tiny_config(), 7), b(tiny_config(), 7), c(tiny_config(), 8);
  CHECK(std::equal(a.params().flat_values().begin(), a.params().flat_values().end(),
                   b.params().flat_values().begin()));
  bool same = std::equal(a.params().flat_values().begin(),
                         a.params().flat_values().end(),
                         c.params().flat_values().begin());
  CHECK_FALSE(same);
}

TEST_CASE("evaluator checkpoint round-trip preserves scores bitwise") {
  TinyWorld w;
  Evaluator ev(tiny_config(), 9);
  std::string path =
      (std::filesystem::temp_directory_path() / "ranklab_eval_test.ckpt").string();
  ev.save(path);
  Evaluator back = Evaluator::load(path);
  CHECK(back.config().hidden == ev.config().hidden);
  CHECK(back.config().enc_widths == ev.config().enc_widths);
  for (const Slate& s : w.test.slates) {
    CHECK(back.list_score(w.universe, s) == ev.list_score(w.universe, s));
  }
  std::filesystem::remove(path);
}

TEST_CASE("score_batch equals per-slate scoring under any thread cap") {
  TinyWorld w;
  Evaluator ev(tiny_config(), 11);
  std::vector<ListScore> serial, parallel;
  set_max_threads(1);
  serial = score_batch(ev, w.universe, w.test.slates);
  set_max_threads(4);
  parallel = score_batch(ev, w.universe, w.test.slates);
  set_max_threads(0);
  REQUIRE(serial.size() == w.test.slates.size());
  for (size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].total == parallel[i].total);
    CHECK(serial[i].total ==
          ev.list_score(w.universe, w.test.slates[i]));
    CHECK(serial[i].p == parallel[i].p);
  }
}

TEST_CASE("evaluator loss matches the per-position cross-entropy sum") {
  TinyWorld w;
  Evaluator ev(tiny_config(), 13);
  std::vector<Slate> batch(w.train.slates.begin(), w.train.slates.begin() + 3);
  const double click_w = 0.3;
  double loss = evaluator_loss(ev, w.universe, batch, click_w, false);

  double expect = 0.0;
  for (const Slate& s : batch) {
    ListScore ls = ev.score(w.universe, s);
    for (int i = 0; i < s.size(); ++i) {
      expect += binary_cross_entropy(ls.p[static_cast<size_t>(i)],
                                     s.purchase_labels[static_cast<size_t>(i)]);
      expect += click_w * binary_cross_entropy(
                              ls.p_click[static_cast<size_t>(i)],
                              s.click_labels[static_cast<size_t>(i)]);
    }
  }
  expect /= static_cast<double>(batch.size());
  CHECK(loss == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("evaluator loss gradient passes a finite-difference check") {
  TinyWorld w;
  Evaluator ev(tiny_config(), 17);
  std::vector<Slate> batch(w.train.slates.begin(), w.train.slates.begin() + 2);
  const double click_w = 0.25;

  evaluator_loss(ev, w.universe, batch, click_w, true);
  auto loss_value = [&]() {
    return evaluator_loss(ev, w.universe, batch, click_w, false);
  };
  GradCheckResult res = grad_check(loss_value, ev.params(), 1e-5, 300, 23);
  CHECK(res.coords_checked >= 300);
  CHECK(res.max_rel_error < 1e-5);
}

TEST_CASE("evaluator training restores the best epoch and is reproducible") {
  TinyWorld w;
  Dataset val = w.test;
  val.split = "val";

  Evaluator a(tiny_config(), 21);
  TrainResult ra = a.train(w.train, val, w.universe, 500);
  REQUIRE_FALSE(ra.epochs.empty());
  CHECK(ra.best_epoch >= 1);
  CHECK(ra.best_epoch <= static_cast<int>(ra.epochs.size()));
  CHECK(ra.click_weight_used == tiny_config().click_weight);
  double best_val = ra.epochs[static_cast<size_t>(ra.best_epoch) - 1].val_loss;
  for (const EpochRow& row : ra.epochs) CHECK(best_val <= row.val_loss);

  Evaluator b(tiny_config(), 21);
  TrainResult rb = b.train(w.train, val, w.universe, 500);
  CHECK(ra.best_epoch == rb.best_epoch);
  CHECK(std::equal(a.params().flat_values().begin(), a.params().flat_values().end(),
                   b.params().flat_values().begin()));
  for (size_t i = 0; i < ra.epochs.size(); ++i) {
    CHECK(ra.epochs[i].train_loss == rb.epochs[i].train_loss);
    CHECK(ra.epochs[i].val_loss == rb.epochs[i].val_loss);
  }

  Dataset empty;
  CHECK_THROWS_AS(a.train(empty, val, w.universe, 1), DataError);
}

TEST_CASE("auto click weight uses the purchase-to-click ratio") {
  TinyWorld w;
  EvaluatorConfig cfg = tiny_config();
  cfg.auto_click_weight = true;
  cfg.max_epochs = 1;
  Evaluator ev(cfg, 23);
  Dataset val = w.test;
  val.split = "val";
  TrainResult r = ev.train(w.train, val, w.universe, 501);

  int64_t purchases = 0, clicks = 0;
  for (const Slate& s : w.train.slates) {
    for (int y : s.purchase_labels) purchases += y;
    for (int y : s.click_labels) clicks += y;
  }
  double expect = clicks > 0 ? static_cast<double>(purchases) / clicks : 0.0;
  CHECK(r.click_weight_used == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("incremental scorer reproduces the batch score position by position") {
  TinyWorld w;
  Evaluator ev(tiny_config(), 29);
  const Slate& s = w.test.slates.at(1);
  ListScore ls = ev.score(w.universe, s);

  EvaluatorScorer scorer(ev, w.universe);
  scorer.begin(s.item_ids, s.bg);
  CHECK(scorer.num_candidates() == s.size());
  EvaluatorScorer::State st = scorer.initial_state();
  for (int i = 0; i < s.size(); ++i) {
    CHECK(scorer.candidate_id(i) == s.item_ids[static_cast<size_t>(i)]);
    double pc = 0.0;
    double p = scorer.step(st, i, &pc);
    CHECK(p == doctest::Approx(ls.p[static_cast<size_t>(i)]).epsilon(1e-12));
    CHECK(pc == doctest::Approx(ls.p_click[static_cast<size_t>(i)]).epsilon(1e-12));
  }
}

TEST_CASE("incremental scorer states branch independently") {
  TinyWorld w;
  Evaluator ev(tiny_config(), 31);
  const Slate& s = w.test.slates.at(2);
  EvaluatorScorer scorer(ev, w.universe);
  scorer.begin(s.item_ids, s.bg);

  EvaluatorScorer::State root = scorer.initial_state();
  scorer.step(root, 0);
  EvaluatorScorer::State branch = root;  // cheap copy
  double p_branch = scorer.step(branch, 1);
  double p_root = scorer.step(root, 1);
  CHECK(p_branch == p_root);  // the branch did not disturb the original
  double p_b2 = scorer.step(branch, 2);
  double p_r2 = scorer.step(root, 2);
  CHECK(p_b2 == p_r2);
}

TEST_CASE("requirement_check is deterministic and bounded") {
  TinyWorld w;
  Evaluator ev(tiny_config(), 37);
  RequirementAccuracy a = requirement_check(ev, w.test, w.universe, w.rule, 900, 2);
  RequirementAccuracy b = requirement_check(ev, w.test, w.universe, w.rule, 900, 2);
  CHECK(a.acc_reversed == b.acc_reversed);
  CHECK(a.acc_shuffled == b.acc_shuffled);
  CHECK(a.acc_label_separated == b.acc_label_separated);
  CHECK(a.pairs_reversed == b.pairs_reversed);
  for (double acc : {a.acc_reversed, a.acc_shuffled, a.acc_label_separated}) {
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
  }
  CHECK(a.pairs_reversed >= 2);
  CHECK(a.pairs_shuffled >= 2);
  CHECK(a.pairs_label_separated >= 2);
  // an impossible floor is a data error, not a silent small sample
  CHECK_THROWS_AS(requirement_check(ev, w.test, w.universe, w.rule, 900, 100000),
                  DataError);
}

TEST_CASE("list score errors and the generalization gap match hand computation") {
  TinyWorld w;
  Evaluator ev(tiny_config(), 41);
  std::vector<double> errs = list_score_errors(ev, w.test, w.universe, w.rule);
  REQUIRE(errs.size() == w.test.slates.size());
  RuleScorer truth(w.rule, w.universe);
  double sum = 0.0;
  for (size_t i = 0; i < errs.size(); ++i) {
    double expect = std::fabs(ev.list_score(w.universe, w.test.slates[i]) -
                              truth.true_score(w.test.slates[i].item_ids));
    CHECK(errs[i] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(errs[i] >= 0.0);
    sum += errs[i];
  }
  GapResult gap = generalization_gap(ev, w.test, w.train, w.universe, w.rule);
  CHECK(gap.mae_on == doctest::Approx(sum / errs.size()).epsilon(1e-12));
  CHECK(gap.mae_off > 0.0);
}
