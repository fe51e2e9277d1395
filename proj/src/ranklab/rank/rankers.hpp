#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ranklab/model/evaluator.hpp"
#include "ranklab/model/generator.hpp"
#include "ranklab/rank/scoring_model.hpp"
#include "ranklab/sim/slate.hpp"
#include "ranklab/sim/universe.hpp"

namespace ranklab {

struct RankOutput {
  std::vector<int> order;      // item ids, best first
  std::vector<double> scores;  // aligned with the input slate's item order
};

// A re-ranking method under evaluation.  run() must be safe to call
// concurrently from several threads; `index` identifies the slate within the
// evaluation run so stochastic methods can derive an independent per-list
// stream that does not depend on scheduling.
//
// Methods that only produce an order report descending positional scores
// (n - rank) so offline metrics have something to chew on; methods with a
// natural per-item score report that score.
class Ranker {
 public:
  virtual ~Ranker() = default;
  virtual std::string name() const = 0;
  virtual RankOutput run(const Slate& slate, int index) const = 0;
};

// Keeps the logged order.
class IdentityRanker : public Ranker {
 public:
  std::string name() const override { return "identity"; }
  RankOutput run(const Slate& slate, int index) const override;
};

// Reverses the logged order.
class ReverseRanker : public Ranker {
 public:
  std::string name() const override { return "reverse"; }
  RankOutput run(const Slate& slate, int index) const override;
};

// Uniformly random permutation, derived from (seed, index).
class RandomRanker : public Ranker {
 public:
  explicit RandomRanker(uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "random"; }
  RankOutput run(const Slate& slate, int index) const override;

 private:
  uint64_t seed_;
};

// Sorts by a per-item scoring model, descending; ties keep the input order.
class ScoringModelRanker : public Ranker {
 public:
  ScoringModelRanker(const ScoringModel& model, const ItemUniverse& universe)
      : model_(&model), universe_(&universe) {}
  std::string name() const override { return to_string(model_->config().loss); }
  RankOutput run(const Slate& slate, int index) const override;

 private:
  const ScoringModel* model_;
  const ItemUniverse* universe_;
};

// Greedy sequence construction against the evaluator: at each position take
// the remaining item with the highest predicted purchase probability in the
// current context (ties pick the earliest input slot).
class GreedyERanker : public Ranker {
 public:
  GreedyERanker(const Evaluator& evaluator, const ItemUniverse& universe)
      : evaluator_(&evaluator), universe_(&universe) {}
  std::string name() const override { return "greedy_e"; }
  RankOutput run(const Slate& slate, int index) const override;

 private:
  const Evaluator* evaluator_;
  const ItemUniverse* universe_;
};

// Scores every item as if it sat at position 1 with no history and sorts by
// that probability (the evaluator's order-independent readout).
class DirectERanker : public Ranker {
 public:
  DirectERanker(const Evaluator& evaluator, const ItemUniverse& universe)
      : evaluator_(&evaluator), universe_(&universe) {}
  std::string name() const override { return "direct_e"; }
  RankOutput run(const Slate& slate, int index) const override;

 private:
  const Evaluator* evaluator_;
  const ItemUniverse* universe_;
};

// Best of k sampled permutations under the evaluator's list score; the first
// permutation reaching the best score wins.  Streams derive from
// (seed, index).
class EnumerateKRanker : public Ranker {
 public:
  EnumerateKRanker(const Evaluator& evaluator, const ItemUniverse& universe,
                   int k, uint64_t seed);
  std::string name() const override { return "enumerate_" + std::to_string(k_); }
  RankOutput run(const Slate& slate, int index) const override;

 private:
  const Evaluator* evaluator_;
  const ItemUniverse* universe_;
  int k_;
  uint64_t seed_;
};

// Greedy rollout of a trained sequence policy (EG-Rerank / EG-Rerank+).
class PolicyRanker : public Ranker {
 public:
  PolicyRanker(const Generator& model, const ItemUniverse& universe,
               std::string name)
      : model_(&model), universe_(&universe), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  RankOutput run(const Slate& slate, int index) const override;

 private:
  const Generator* model_;
  const ItemUniverse* universe_;
  std::string name_;
};

}  // namespace ranklab
