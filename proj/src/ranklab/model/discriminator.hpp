#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ranklab/core/adam.hpp"
#include "ranklab/core/lstm.hpp"
#include "ranklab/core/mlp.hpp"
#include "ranklab/core/params.hpp"
#include "ranklab/model/generator.hpp"
#include "ranklab/sim/dataset.hpp"
#include "ranklab/sim/slate.hpp"
#include "ranklab/sim/universe.hpp"

namespace ranklab {

// Sequence discriminator: per-position realness scores in (0, 1) from an
// item encoder, an LSTM over the displayed order (state starts at zero), and
// a scoring head.  The list-level output is the sum of per-position scores,
// so one item's contribution adds to the list score independently of the
// items after it.
struct DiscriminatorConfig {
  int feature_dim = 0;
  int bg_dim = 0;
  std::vector<int> enc_widths{64, 64};
  int hidden = 64;
  std::vector<int> head_widths{64, 32};
  double learning_rate = 1e-3;
};

struct ListRealness {
  std::vector<double> scores;  // per-position realness
  double total = 0.0;          // sum over positions
};

class Discriminator {
 public:
  Discriminator(DiscriminatorConfig cfg, uint64_t seed);

  const DiscriminatorConfig& config() const { return cfg_; }
  const ParameterSet& params() const { return params_; }
  ParameterSet& params() { return params_; }

  ListRealness score_list(const ItemUniverse& universe, const Slate& slate) const;

  void save(const std::string& path) const;
  static Discriminator load(const std::string& path);

 private:
  friend class DiscriminatorScorer;
  friend class DiscriminatorTrainer;

  DiscriminatorConfig cfg_;
  ParameterSet params_;
  MlpSpec enc_spec_, head_spec_;
  LstmSpec lstm_spec_;
};

// Incremental scoring over one candidate set, mirror of EvaluatorScorer but
// with a zero initial state; used to shape rewards inside policy rollouts
// where items arrive one position at a time.
class DiscriminatorScorer {
 public:
  DiscriminatorScorer(const Discriminator& model, const ItemUniverse& universe);

  void begin(std::span<const int> candidate_ids, std::span<const double> bg);

  struct State {
    std::vector<double> h, c;
    int t = 0;
  };
  State initial_state() const;
  // Realness score of the candidate in `slot` when shown at position st.t.
  double step(State& st, int slot);

 private:
  const Discriminator* model_;
  const ItemUniverse* universe_;
  MlpRef enc_ref_, head_ref_;
  LstmRef lstm_ref_;
  std::vector<int> ids_;
  std::vector<std::vector<double>> s_;
  std::vector<double> in_, cat_;
  MlpCache enc_cache_, head_cache_;
  LstmCache lstm_cache_;
};

// Reward shaping (R+ = R + beta * realness).
inline double shaped_reward(double base_reward, double realness, double beta) {
  return base_reward + beta * realness;
}

// Owns the optimizer state for alternating discriminator updates.  Real
// lists are labelled 1, generated lists 0; the loss is the mean per-item
// binary cross-entropy over every position of both batches.
class DiscriminatorTrainer {
 public:
  DiscriminatorTrainer(Discriminator& model, const ItemUniverse& universe,
                       double learning_rate);
  ~DiscriminatorTrainer();
  DiscriminatorTrainer(DiscriminatorTrainer&&) noexcept;
  DiscriminatorTrainer& operator=(DiscriminatorTrainer&&) noexcept;

  struct StepStats {
    double loss = 0.0;
    // List-level accuracy (mean positional score > 0.5 means "real"),
    // measured on the step's batches before the weight update.
    double accuracy = 0.0;
  };
  StepStats step(const std::vector<Slate>& real_lists,
                 const std::vector<Slate>& generated_lists);

  // Forward (and optionally backward) pass without an optimizer step; the
  // gradient-check entry point.
  double loss(const std::vector<Slate>& real_lists,
              const std::vector<Slate>& generated_lists, bool backward);

 private:
  struct Workspace;
  double run(const std::vector<Slate>& real_lists,
             const std::vector<Slate>& generated_lists, bool backward,
             double* accuracy);

  Discriminator* model_;
  const ItemUniverse* universe_;
  Adam opt_;
  std::vector<std::unique_ptr<Workspace>> slots_;
};

// Separation between two list distributions: lists are embedded as the
// concatenation of their items' features in display order, the fifth of A
// farthest from A's own centroid is dropped (outlier trim), and the result
// is the mean Euclidean distance from the kept embeddings to B's centroid.
double distribution_distance(const ItemUniverse& universe,
                             const std::vector<Slate>& a,
                             const std::vector<Slate>& b);

// EG-Rerank+: the shared PPO loop with discriminator co-training (one
// discriminator step per generator batch) and shaped rewards.
EgRunResult train_eg_rerank_plus(const Evaluator& evaluator,
                                 const ItemUniverse& universe, Generator& model,
                                 Discriminator& disc, const Dataset& real_data,
                                 const EgTrainConfig& cfg, uint64_t seed,
                                 const RuleScorer* truth = nullptr);

}  // namespace ranklab
