#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <vector>

#include "ranklab/core/error.hpp"
#include "ranklab/core/gradcheck.hpp"
#include "ranklab/core/rng.hpp"
#include "ranklab/model/discriminator.hpp"
#include "ranklab/model/evaluator.hpp"
#include "ranklab/model/generator.hpp"
#include "ranklab/sim/dataset.hpp"

using namespace ranklab;

namespace {

struct PolicyWorld {
  ItemUniverse universe;
  GroundTruthRule rule;
  Evaluator evaluator;
  std::vector<int> candidates;
  std::vector<double> bg;

  PolicyWorld()
      : universe(build_universe(16, 3, 200)),
        rule(build_rule(universe, 4, 201)),
        evaluator(
            [] {
              EvaluatorConfig c;
              c.feature_dim = 3;
              c.bg_dim = 2;
              c.enc_widths = {6, 5};
              c.hidden = 5;
              c.head_widths = {4};
              return c;
            }(),
            202),
        candidates{3, 7, 11, 15},
        bg(constant_bg(2)) {}
};

GeneratorConfig tiny_gen_config() {
  GeneratorConfig cfg;
  cfg.feature_dim = 3;
  cfg.bg_dim = 2;
  cfg.senc_widths = {6, 5};
  cfg.aenc_widths = {6, 5};
  cfg.hidden = 5;
  cfg.head_widths = {4};
  return cfg;
}

}  // namespace

TEST_CASE("generator checkpoint round-trip preserves parameters bitwise") {
  Generator g(tiny_gen_config(), 55);
  std::string path =
      (std::filesystem::temp_directory_path() / "ranklab_gen_test.ckpt").string();
  g.save(path);
  Generator back = Generator::load(path);
  CHECK(back.config().hidden == g.config().hidden);
  CHECK(std::equal(g.params().flat_values().begin(), g.params().flat_values().end(),
                   back.params().flat_values().begin()));
  std::filesystem::remove(path);
}

TEST_CASE("sampler distributes probability only over unpicked candidates") {
  PolicyWorld w;
  Generator g(tiny_gen_config(), 60);
  GeneratorSampler sampler(g, w.universe);
  sampler.begin(w.candidates, w.bg);
  CHECK(sampler.num_candidates() == 4);
  CHECK(sampler.candidate_id(2) == 11);

  GeneratorSampler::State st = sampler.initial_state();
  std::vector<double> p;
  sampler.advance(st);
  sampler.probs(st, p);
  REQUIRE(p.size() == 4);
  double sum = 0.0;
  for (double v : p) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  sampler.commit(st, 2);
  sampler.advance(st);
  sampler.probs(st, p);
  CHECK(p[2] == 0.0);  // picked slot is masked out
  sum = 0.0;
  for (double v : p) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  sampler.commit(st, 0);
  sampler.advance(st);
  sampler.probs(st, p);
  CHECK(p[0] == 0.0);
  CHECK(p[2] == 0.0);
}

TEST_CASE("action_distribution matches the sampler and validates the prefix") {
  PolicyWorld w;
  Generator g(tiny_gen_config(), 61);

  std::vector<int> prefix{1, 3};
  std::vector<double> expect;
  {
    GeneratorSampler sampler(g, w.universe);
    sampler.begin(w.candidates, w.bg);
    GeneratorSampler::State st = sampler.initial_state();
    for (int slot : prefix) {
      sampler.advance(st);
      sampler.commit(st, slot);
    }
    sampler.advance(st);
    sampler.probs(st, expect);
  }
  std::vector<double> got =
      action_distribution(g, w.universe, w.bg, prefix, w.candidates);
  REQUIRE(got.size() == expect.size());
  for (size_t i = 0; i < got.size(); ++i)
    CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));

  std::vector<int> full{0, 1, 2, 3};
  CHECK_THROWS_AS(action_distribution(g, w.universe, w.bg, full, w.candidates),
                  DataError);
}

TEST_CASE("fresh generators spread probability uniformly at the start") {
  // zero-initialized head layers give equal logits over candidates
  PolicyWorld w;
  Generator g(tiny_gen_config(), 62);
  std::vector<double> p =
      action_distribution(g, w.universe, w.bg, {}, w.candidates);
  // not exactly uniform (weights are random), but close and full-support
  for (double v : p) CHECK(v > 0.01);
}

TEST_CASE("rollout produces a permutation with faithful bookkeeping") {
  PolicyWorld w;
  Generator g(tiny_gen_config(), 63);
  Rng rng(7);
  Trajectory t = rollout(g, w.evaluator, w.universe, w.candidates, w.bg,
                         RolloutMode::sample, rng);
  REQUIRE(t.slots.size() == 4);
  REQUIRE(t.item_ids.size() == 4);
  REQUIRE(t.logp.size() == 4);
  REQUIRE(t.eval_p.size() == 4);
  REQUIRE(t.rewards.size() == 4);
  REQUIRE(t.returns.size() == 4);

  std::set<int> slots(t.slots.begin(), t.slots.end());
  CHECK(slots.size() == 4);
  for (int i = 0; i < 4; ++i)
    CHECK(t.item_ids[static_cast<size_t>(i)] ==
          t.candidates[static_cast<size_t>(t.slots[static_cast<size_t>(i)])]);

  // without a discriminator the reward is exactly the evaluator probability
  CHECK(t.rewards == t.eval_p);

  // returns are suffix sums of rewards
  double acc = 0.0;
  for (int i = 3; i >= 0; --i) {
    acc += t.rewards[static_cast<size_t>(i)];
    CHECK(t.returns[static_cast<size_t>(i)] == doctest::Approx(acc).epsilon(1e-12));
  }
  CHECK(t.evaluator_score() ==
        doctest::Approx(t.returns.front()).epsilon(1e-12));

  // log-probabilities are consistent with the per-state distributions
  for (double lp : t.logp) {
    CHECK(lp <= 0.0);
    CHECK(std::isfinite(lp));
  }

  // the evaluator per-position probabilities match scoring the realized list
  Slate realized;
  realized.item_ids = t.item_ids;
  realized.bg = t.bg;
  ListScore ls = w.evaluator.score(w.universe, realized);
  for (int i = 0; i < 4; ++i)
    CHECK(t.eval_p[static_cast<size_t>(i)] ==
          doctest::Approx(ls.p[static_cast<size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("greedy rollouts are deterministic and consume no randomness") {
  PolicyWorld w;
  Generator g(tiny_gen_config(), 64);
  Rng rng(99);
  Trajectory a = rollout(g, w.evaluator, w.universe, w.candidates, w.bg,
                         RolloutMode::greedy, rng);
  CHECK(rng.u64() == Rng(99).u64());  // untouched stream
  Rng rng2(1234);
  Trajectory b = rollout(g, w.evaluator, w.universe, w.candidates, w.bg,
                         RolloutMode::greedy, rng2);
  CHECK(a.slots == b.slots);
  CHECK(a.item_ids == b.item_ids);
}

TEST_CASE("beta zero with a live discriminator changes nothing") {
  PolicyWorld w;
  Generator g(tiny_gen_config(), 65);
  DiscriminatorConfig dc;
  dc.feature_dim = 3;
  dc.bg_dim = 2;
  dc.enc_widths = {6, 5};
  dc.hidden = 5;
  dc.head_widths = {4};
  Discriminator disc(dc, 66);

  Rng r1(42), r2(42);
  Trajectory plain = rollout(g, w.evaluator, w.universe, w.candidates, w.bg,
                             RolloutMode::sample, r1);
  Trajectory shaped = rollout(g, w.evaluator, w.universe, w.candidates, w.bg,
                              RolloutMode::sample, r2, &disc, 0.0);
  CHECK(plain.slots == shaped.slots);
  CHECK(plain.logp == shaped.logp);
  CHECK(plain.rewards == shaped.rewards);  // bitwise: r + 0 * realness == r
  CHECK(plain.returns == shaped.returns);
}

TEST_CASE("positive beta adds discriminator realness to the rewards") {
  PolicyWorld w;
  Generator g(tiny_gen_config(), 67);
  DiscriminatorConfig dc;
  dc.feature_dim = 3;
  dc.bg_dim = 2;
  dc.enc_widths = {6, 5};
  dc.hidden = 5;
  dc.head_widths = {4};
  Discriminator disc(dc, 68);

  Rng r1(43), r2(43);
  Trajectory plain = rollout(g, w.evaluator, w.universe, w.candidates, w.bg,
                             RolloutMode::sample, r1);
  const double beta = 0.5;
  Trajectory shaped = rollout(g, w.evaluator, w.universe, w.candidates, w.bg,
                              RolloutMode::sample, r2, &disc, beta);
  CHECK(plain.slots == shaped.slots);  // same policy, same draws

  Slate realized;
  realized.item_ids = shaped.item_ids;
  realized.bg = shaped.bg;
  ListRealness real = disc.score_list(w.universe, realized);
  for (int i = 0; i < 4; ++i) {
    double expect = shaped_reward(plain.rewards[static_cast<size_t>(i)],
                                  real.scores[static_cast<size_t>(i)], beta);
    CHECK(shaped.rewards[static_cast<size_t>(i)] ==
          doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("estimate_value with the last item forced is exact") {
  PolicyWorld w;
  Generator g(tiny_gen_config(), 69);
  std::vector<int> prefix{0, 2, 1};  // only slot 3 remains
  Rng rng(5);
  ValueEstimate ve = estimate_value(g, w.evaluator, w.universe, w.candidates,
                                    w.bg, prefix, 4, 1e-3, rng);
  // every completion is the same single continuation: sigma hits the floor
  CHECK(ve.sigma == doctest::Approx(1e-3).epsilon(1e-12));

  // the value is the reward-to-go of that continuation
  EvaluatorScorer scorer(w.evaluator, w.universe);
  scorer.begin(w.candidates, w.bg);
  EvaluatorScorer::State st = scorer.initial_state();
  for (int slot : prefix) scorer.step(st, slot);
  double expect = scorer.step(st, 3);
  CHECK(ve.value == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("ppo surrogate equals minus mean advantage at the behavior policy") {
  PolicyWorld w;
  Generator g(tiny_gen_config(), 70);
  Rng rng(11);
  std::vector<Trajectory> batch;
  for (int e = 0; e < 4; ++e) {
    Trajectory t = rollout(g, w.evaluator, w.universe, w.candidates, w.bg,
                           RolloutMode::sample, rng);
    t.advantage.assign(t.slots.size(), 0.0);
    for (size_t i = 0; i < t.slots.size(); ++i)
      t.advantage[i] = 0.3 * static_cast<double>(i) - 0.4;
    batch.push_back(std::move(t));
  }
  double mean_adv = 0.0;
  int n = 0;
  for (const Trajectory& t : batch)
    for (double a : t.advantage) {
      mean_adv += a;
      ++n;
    }
  mean_adv /= n;

  // the parameters have not moved since collection, so every ratio is 1
  double loss = ppo_surrogate_loss(g, w.universe, batch, 0.2, false);
  CHECK(loss == doctest::Approx(-mean_adv).epsilon(1e-9));
}

TEST_CASE("ppo surrogate gradient passes a finite-difference check") {
  PolicyWorld w;
  Generator g(tiny_gen_config(), 71);
  Rng rng(13);
  std::vector<Trajectory> batch;
  for (int e = 0; e < 2; ++e) {
    Trajectory t = rollout(g, w.evaluator, w.universe, w.candidates, w.bg,
                           RolloutMode::sample, rng);
    t.advantage.assign(t.slots.size(), 0.0);
    for (size_t i = 0; i < t.slots.size(); ++i)
      t.advantage[i] = (i % 2 == 0) ? 0.7 : -0.5;
    batch.push_back(std::move(t));
  }
  // Perturb the parameters so the ratios move off 1 and the clip is partially
  // active; the loss stays differentiable at the sampled coordinates.
  {
    auto v = g.params().mutable_flat_values();
    Rng jitter(77);
    for (double& x : v) x += 0.01 * jitter.uniform(-1.0, 1.0);
  }

  ppo_surrogate_loss(g, w.universe, batch, 0.2, true);
  auto loss_value = [&]() {
    return ppo_surrogate_loss(g, w.universe, batch, 0.2, false);
  };
  GradCheckResult res = grad_check(loss_value, g.params(), 1e-5, 250, 31);
  CHECK(res.max_rel_error < 1e-5);
}

TEST_CASE("a short eg training loop lifts the mean evaluator score") {
  PolicyWorld w;
  Generator g(tiny_gen_config(), 72);
  EgTrainConfig cfg;
  cfg.iterations = 6;
  cfg.batch_episodes = 8;
  cfg.minibatch_episodes = 4;
  cfg.epochs_per_batch = 2;
  cfg.k_rollouts = 3;
  cfg.list_length = 4;
  RuleScorer truth(w.rule, w.universe);
  EgRunResult res = train_eg_rerank(w.evaluator, w.universe, g, cfg, 1000, &truth);
  REQUIRE(static_cast<int>(res.trace.size()) == cfg.iterations);
  for (int i = 0; i < cfg.iterations; ++i) {
    CHECK(res.trace[static_cast<size_t>(i)].iteration == i + 1);
    CHECK(std::isfinite(res.trace[static_cast<size_t>(i)].mean_evaluator_score));
    CHECK(std::isfinite(res.trace[static_cast<size_t>(i)].mean_true_score));
    // plain EG-Rerank reports no discriminator columns
    CHECK(std::isnan(res.trace[static_cast<size_t>(i)].discriminator_accuracy));
    CHECK(std::isnan(res.trace[static_cast<size_t>(i)].distribution_distance));
    // without shaping the shaped return equals the evaluator score
    CHECK(res.trace[static_cast<size_t>(i)].mean_shaped_return ==
          res.trace[static_cast<size_t>(i)].mean_evaluator_score);
  }

  // reproducibility of the whole loop
  Generator g2(tiny_gen_config(), 72);
  EgRunResult res2 = train_eg_rerank(w.evaluator, w.universe, g2, cfg, 1000, &truth);
  CHECK(std::equal(g.params().flat_values().begin(), g.params().flat_values().end(),
                   g2.params().flat_values().begin()));
  for (size_t i = 0; i < res.trace.size(); ++i)
    CHECK(res.trace[i].mean_evaluator_score == res2.trace[i].mean_evaluator_score);
}
