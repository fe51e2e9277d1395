#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ranklab/core/lstm.hpp"
#include "ranklab/core/mlp.hpp"
#include "ranklab/core/params.hpp"
#include "ranklab/model/evaluator.hpp"
#include "ranklab/sim/rule.hpp"
#include "ranklab/sim/universe.hpp"

namespace ranklab {

class Discriminator;

// Sequential slate-construction policy.  The state LSTM consumes
// senc([bg, x_prev]) where x_prev is the feature of the item emitted at the
// previous step (zero at the start); each remaining candidate i is scored by
// head([aenc(x_i), h_state]) and the next action is drawn from the masked
// softmax over those logits.
struct GeneratorConfig {
  int feature_dim = 0;
  int bg_dim = 0;
  std::vector<int> senc_widths{64, 64};  // state-input encoder
  std::vector<int> aenc_widths{64, 64};  // candidate encoder
  int hidden = 64;
  std::vector<int> head_widths{64, 32};
  double learning_rate = 1e-3;
};

class Generator {
 public:
  Generator(GeneratorConfig cfg, uint64_t seed);

  const GeneratorConfig& config() const { return cfg_; }
  const ParameterSet& params() const { return params_; }
  ParameterSet& params() { return params_; }

  void save(const std::string& path) const;
  static Generator load(const std::string& path);

 private:
  friend class GeneratorSampler;
  friend struct PpoWorkspace;

  GeneratorConfig cfg_;
  ParameterSet params_;
  MlpSpec senc_spec_, aenc_spec_, head_spec_;
  LstmSpec lstm_spec_;
};

// Incremental policy evaluation over one candidate set.  States are cheap to
// copy (that is what branching value estimation does).  One sampler per
// thread; the frozen model is shared.
class GeneratorSampler {
 public:
  GeneratorSampler(const Generator& model, const ItemUniverse& universe);

  void begin(std::span<const int> candidate_ids, std::span<const double> bg);

  struct State {
    std::vector<double> h, c;
    std::vector<uint8_t> picked;
    int prev_slot = -1;  // candidate emitted at the previous step
    int t = 0;
  };
  State initial_state() const;

  // Advances the LSTM for the pending step (consumes prev_slot); must be
  // called exactly once before probs()/pick() at each step.
  void advance(State& st);
  // Masked softmax over remaining candidates; zero on picked slots.
  void probs(const State& st, std::vector<double>& out);
  // Marks the slot picked and records it as prev for the next advance.
  void commit(State& st, int slot);

  int num_candidates() const { return static_cast<int>(ids_.size()); }
  int candidate_id(int slot) const { return ids_[static_cast<size_t>(slot)]; }

 private:
  const Generator* model_;
  const ItemUniverse* universe_;
  MlpRef senc_ref_, aenc_ref_, head_ref_;
  LstmRef lstm_ref_;
  std::vector<int> ids_;
  std::vector<std::vector<double>> ha_;  // candidate encodings
  std::vector<double> bg_;
  std::vector<double> in_, u_, cat_, logits_;
  MlpCache senc_cache_, aenc_cache_, head_cache_;
  LstmCache lstm_cache_;
};

// One collected episode.
struct Trajectory {
  std::vector<int> candidates;   // candidate ids, slot order
  std::vector<double> bg;
  std::vector<int> slots;        // chosen slot per step
  std::vector<int> item_ids;     // realized order (candidates[slots[t]])
  std::vector<double> logp;      // behavior log-probabilities
  std::vector<double> eval_p;    // evaluator per-position purchase probability
  std::vector<double> rewards;   // eval_p + beta * discriminator realness
  std::vector<double> returns;   // suffix sums of rewards
  std::vector<double> value;     // per-state k-rollout value estimate
  std::vector<double> sigma;     // per-state return standard deviation
  std::vector<double> advantage; // (returns - value) / sigma

  double evaluator_score() const {
    double s = 0.0;
    for (double p : eval_p) s += p;
    return s;
  }
};

enum class RolloutMode { sample, greedy };

// Runs the policy over one candidate set and scores it with the evaluator
// (and optionally a frozen discriminator whose per-item realness is mixed in
// with weight beta).  Greedy mode takes argmax with lowest-slot tie-break
// and consumes no randomness.
Trajectory rollout(const Generator& model, const Evaluator& evaluator,
                   const ItemUniverse& universe,
                   std::span<const int> candidate_ids,
                   std::span<const double> bg, RolloutMode mode, Rng& rng,
                   const Discriminator* disc = nullptr, double beta = 0.0);

// Action distribution at an arbitrary prefix (spec-level entry point; the
// training loop uses GeneratorSampler directly).  Throws DataError when the
// prefix exhausts the candidates.
std::vector<double> action_distribution(const Generator& model,
                                        const ItemUniverse& universe,
                                        std::span<const double> bg,
                                        std::span<const int> picked_prefix_slots,
                                        std::span<const int> candidate_ids);

// Monte Carlo state value: mean and population standard deviation (floored
// at sigma_floor) of k sampled completions from the state reached by
// prefix_slots.
struct ValueEstimate {
  double value = 0.0;
  double sigma = 0.0;
};
ValueEstimate estimate_value(const Generator& model, const Evaluator& evaluator,
                             const ItemUniverse& universe,
                             std::span<const int> candidate_ids,
                             std::span<const double> bg,
                             std::span<const int> prefix_slots, int k,
                             double sigma_floor, Rng& rng,
                             const Discriminator* disc = nullptr,
                             double beta = 0.0);

// Clipped-surrogate loss over a batch of trajectories whose logp/advantage
// fields are populated: -mean_t min(r_t A_t, clip(r_t) A_t).  When
// `backward`, the model's gradients are zeroed and repopulated.  Throws
// DivergenceError on a non-finite ratio.
double ppo_surrogate_loss(Generator& model, const ItemUniverse& universe,
                          const std::vector<Trajectory>& batch, double clip,
                          bool backward);

// Shared training-loop configuration for EG-Rerank (beta = 0, no
// discriminator) and EG-Rerank+ (discriminator co-training).
struct EgTrainConfig {
  int iterations = 150;
  int batch_episodes = 32;
  int minibatch_episodes = 8;
  int epochs_per_batch = 4;
  int k_rollouts = 8;
  double clip = 0.2;
  double sigma_floor = 1e-3;
  int list_length = 10;          // N drawn per episode
  double beta = 0.2;             // reward-shaping weight (EG-Rerank+ only)
  int disc_minibatch_lists = 32; // real/generated lists per discriminator step
  double disc_learning_rate = 1e-3;
  // Trace extras: distribution distance is measured against this many real
  // lists when a real pool is supplied.
  int distance_reference_lists = 256;
};

struct EgTraceRow {
  int iteration = 0;
  double mean_shaped_return = 0.0;
  double mean_evaluator_score = 0.0;
  double mean_true_score = 0.0;        // NaN when no simulator oracle
  double discriminator_accuracy = 0.0; // NaN for plain EG-Rerank
  double distribution_distance = 0.0;  // NaN for plain EG-Rerank
};

struct EgRunResult {
  std::vector<EgTraceRow> trace;
  int warnings_imbalance = 0;  // iterations with saturated discriminator
};

// Internal engine shared by EG-Rerank and EG-Rerank+ (exposed for the two
// public wrappers): when `disc` is null this is plain EG-Rerank and beta is
// forced to 0; otherwise one discriminator step runs per iteration against
// minibatches of `real_data`.
EgRunResult eg_train_loop(const Evaluator& evaluator,
                          const ItemUniverse& universe, Generator& model,
                          Discriminator* disc, const Dataset* real_data,
                          const EgTrainConfig& cfg, uint64_t seed,
                          const RuleScorer* truth);

// EG-Rerank: PPO against evaluator rewards on fresh candidate draws.
EgRunResult train_eg_rerank(const Evaluator& evaluator,
                            const ItemUniverse& universe, Generator& model,
                            const EgTrainConfig& cfg, uint64_t seed,
                            const RuleScorer* truth = nullptr);

}  // namespace ranklab
