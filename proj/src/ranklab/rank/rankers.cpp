#include "ranklab/rank/rankers.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "ranklab/core/error.hpp"
#include "ranklab/core/rng.hpp"

namespace ranklab {

namespace {

// Descending positional scores for order-only methods: the item ranked r-th
// (0-based) gets n - r, written back in input-slot order.
std::vector<double> positional_scores(const std::vector<int>& slot_order, int n) {
  std::vector<double> scores(static_cast<size_t>(n), 0.0);
  for (int r = 0; r < n; ++r)
    scores[static_cast<size_t>(slot_order[static_cast<size_t>(r)])] =
        static_cast<double>(n - r);
  return scores;
}

RankOutput from_slot_order(const Slate& slate, const std::vector<int>& slot_order) {
  const int n = slate.size();
  RankOutput out;
  out.order.resize(static_cast<size_t>(n));
  for (int r = 0; r < n; ++r)
    out.order[static_cast<size_t>(r)] =
        slate.item_ids[static_cast<size_t>(slot_order[static_cast<size_t>(r)])];
  out.scores = positional_scores(slot_order, n);
  return out;
}

// Stable descending sort of slots by score: equal scores keep input order.
std::vector<int> slots_by_score_desc(const std::vector<double>& scores) {
  std::vector<int> slots(scores.size());
  std::iota(slots.begin(), slots.end(), 0);
  std::stable_sort(slots.begin(), slots.end(), [&](int a, int b) {
    return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
  });
  return slots;
}

}  // namespace

RankOutput IdentityRanker::run(const Slate& slate, int /*index*/) const {
  std::vector<int> slots(static_cast<size_t>(slate.size()));
  std::iota(slots.begin(), slots.end(), 0);
  return from_slot_order(slate, slots);
}

RankOutput ReverseRanker::run(const Slate& slate, int /*index*/) const {
  std::vector<int> slots(static_cast<size_t>(slate.size()));
  std::iota(slots.begin(), slots.end(), 0);
  std::reverse(slots.begin(), slots.end());
  return from_slot_order(slate, slots);
}

RankOutput RandomRanker::run(const Slate& slate, int index) const {
  std::vector<int> slots(static_cast<size_t>(slate.size()));
  std::iota(slots.begin(), slots.end(), 0);
  Rng rng(mix_seed(mix_seed(seed_, "random-ranker"), static_cast<uint64_t>(index)));
  shuffle(slots, rng);
  return from_slot_order(slate, slots);
}

RankOutput ScoringModelRanker::run(const Slate& slate, int /*index*/) const {
  RankOutput out;
  out.scores = model_->score(*universe_, slate);
  std::vector<int> slots = slots_by_score_desc(out.scores);
  out.order.resize(slots.size());
  for (size_t r = 0; r < slots.size(); ++r)
    out.order[r] = slate.item_ids[static_cast<size_t>(slots[r])];
  return out;
}

RankOutput GreedyERanker::run(const Slate& slate, int /*index*/) const {
  const int n = slate.size();
  EvaluatorScorer scorer(*evaluator_, *universe_);
  scorer.begin(slate.item_ids, slate.bg);
  EvaluatorScorer::State st = scorer.initial_state();
  std::vector<uint8_t> picked(static_cast<size_t>(n), 0);
  std::vector<int> slots;
  slots.reserve(static_cast<size_t>(n));
  for (int pos = 0; pos < n; ++pos) {
    int best_slot = -1;
    double best_p = -1.0;
    for (int i = 0; i < n; ++i) {
      if (picked[static_cast<size_t>(i)]) continue;
      EvaluatorScorer::State trial = st;
      const double p = scorer.step(trial, i);
      if (p > best_p) {
        best_p = p;
        best_slot = i;
      }
    }
    scorer.step(st, best_slot);
    picked[static_cast<size_t>(best_slot)] = 1;
    slots.push_back(best_slot);
  }
  return from_slot_order(slate, slots);
}

RankOutput DirectERanker::run(const Slate& slate, int /*index*/) const {
  const int n = slate.size();
  EvaluatorScorer scorer(*evaluator_, *universe_);
  scorer.begin(slate.item_ids, slate.bg);
  const EvaluatorScorer::State st0 = scorer.initial_state();
  RankOutput out;
  out.scores.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    EvaluatorScorer::State st = st0;
    out.scores[static_cast<size_t>(i)] = scorer.step(st, i);
  }
  std::vector<int> slots = slots_by_score_desc(out.scores);
  out.order.resize(slots.size());
  for (size_t r = 0; r < slots.size(); ++r)
    out.order[r] = slate.item_ids[static_cast<size_t>(slots[r])];
  return out;
}

EnumerateKRanker::EnumerateKRanker(const Evaluator& evaluator,
                                   const ItemUniverse& universe, int k,
                                   uint64_t seed)
    : evaluator_(&evaluator), universe_(&universe), k_(k), seed_(seed) {
  if (k <= 0) throw ConfigError("enumerate needs k > 0 sampled orders");
}

RankOutput EnumerateKRanker::run(const Slate& slate, int index) const {
  const int n = slate.size();
  EvaluatorScorer scorer(*evaluator_, *universe_);
  scorer.begin(slate.item_ids, slate.bg);
  Rng rng(mix_seed(mix_seed(seed_, "enumerate"), static_cast<uint64_t>(index)));

  std::vector<int> perm(static_cast<size_t>(n));
  std::vector<int> best_perm;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < k_; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm, rng);
    EvaluatorScorer::State st = scorer.initial_state();
    double total = 0.0;
    for (int slot : perm) total += scorer.step(st, slot);
    if (total > best_score) {
      best_score = total;
      best_perm = perm;
    }
  }
  return from_slot_order(slate, best_perm);
}

RankOutput PolicyRanker::run(const Slate& slate, int /*index*/) const {
  const int n = slate.size();
  GeneratorSampler sampler(*model_, *universe_);
  sampler.begin(slate.item_ids, slate.bg);
  GeneratorSampler::State st = sampler.initial_state();
  std::vector<double> probs;
  std::vector<int> slots;
  slots.reserve(static_cast<size_t>(n));
  for (int pos = 0; pos < n; ++pos) {
    sampler.advance(st);
    sampler.probs(st, probs);
    int best_slot = -1;
    double best_p = -1.0;
    for (int i = 0; i < n; ++i) {
      if (st.picked[static_cast<size_t>(i)]) continue;
      if (probs[static_cast<size_t>(i)] > best_p) {
        best_p = probs[static_cast<size_t>(i)];
        best_slot = i;
      }
    }
    sampler.commit(st, best_slot);
    slots.push_back(best_slot);
  }
  return from_slot_order(slate, slots);
}

}  // namespace ranklab
