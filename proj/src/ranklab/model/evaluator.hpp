#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ranklab/core/lstm.hpp"
#include "ranklab/core/mlp.hpp"
#include "ranklab/core/params.hpp"
#include "ranklab/sim/dataset.hpp"
#include "ranklab/sim/rule.hpp"
#include "ranklab/sim/slate.hpp"
#include "ranklab/sim/universe.hpp"

namespace ranklab {

// Sequence-conditioned purchase model: per item, s_i = enc([x_i, bg]); the
// recurrence h_i = LSTM(h_{i-1}, s_i) starts from h_0 = mean encoding of the
// candidate set; two sigmoid heads over [s_i, h_i] predict purchase and
// click probabilities.  The list score is the sum of per-position purchase
// probabilities — the model-based ranking metric everything else consumes.
struct EvaluatorConfig {
  int feature_dim = 0;
  int bg_dim = 0;
  std::vector<int> enc_widths{64, 64};  // last width must equal `hidden`
  int hidden = 64;
  std::vector<int> head_widths{64, 32};
  double click_weight = 0.25;   // alpha of the joint loss
  bool auto_click_weight = false;  // recompute as purchases/clicks ratio
  double learning_rate = 1e-3;
  int batch_lists = 64;
  int max_epochs = 30;
  int patience = 8;
};

struct ListScore {
  std::vector<double> p;        // per-position purchase probability
  std::vector<double> p_click;
  double total = 0.0;           // sum of p
};

struct EpochRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochRow> epochs;
  int best_epoch = 0;
  double click_weight_used = 0.0;
};

class Evaluator {
 public:
  Evaluator(EvaluatorConfig cfg, uint64_t seed);

  const EvaluatorConfig& config() const { return cfg_; }
  const ParameterSet& params() const { return params_; }
  ParameterSet& params() { return params_; }

  ListScore score(const ItemUniverse& universe, const Slate& slate) const;
  double list_score(const ItemUniverse& universe, const Slate& slate) const {
    return score(universe, slate).total;
  }

  // Minimizes sum_i CE(p_i, y_i) + alpha * sum_i CE(p_click_i, y_click_i)
  // with minibatch Adam, early stopping on validation loss (patience), and
  // restores the best-epoch parameters.  Throws DataError on an empty
  // dataset and DivergenceError on a non-finite loss.
  TrainResult train(const Dataset& train_data, const Dataset& val_data,
                    const ItemUniverse& universe, uint64_t seed);

  void save(const std::string& path) const;
  static Evaluator load(const std::string& path);

 private:
  friend class EvaluatorScorer;
  friend double evaluator_loss(Evaluator&, const ItemUniverse&,
                               const std::vector<Slate>&, double, bool);

  EvaluatorConfig cfg_;
  ParameterSet params_;
  MlpSpec enc_spec_, phead_spec_, chead_spec_;
  LstmSpec lstm_spec_;
};

// Mean Eq.-6-style loss over a batch of labeled slates; when `backward` is
// set, the model's gradients are zeroed and repopulated.  Public entry point
// for finite-difference gradient verification.
double evaluator_loss(Evaluator& model, const ItemUniverse& universe,
                      const std::vector<Slate>& slates, double click_weight,
                      bool backward);

// Incremental scorer for slate-construction loops: encode a candidate set
// once, then advance position by position.  States are cheap to copy, which
// is what the generator's branching value estimation relies on.  One scorer
// instance serves one thread; the underlying frozen model is shared freely.
class EvaluatorScorer {
 public:
  EvaluatorScorer(const Evaluator& model, const ItemUniverse& universe);

  void begin(std::span<const int> candidate_ids, std::span<const double> bg);

  struct State {
    std::vector<double> h, c;
    int t = 0;
  };
  State initial_state() const;

  // Scores the candidate in `slot` (index into the begin() set) at the
  // state's next position and advances the state.  p_click may be null.
  double step(State& st, int slot, double* p_click = nullptr);

  int num_candidates() const { return static_cast<int>(ids_.size()); }
  int candidate_id(int slot) const { return ids_[static_cast<size_t>(slot)]; }
  std::span<const double> encoding(int slot) const {
    return s_[static_cast<size_t>(slot)];
  }

 private:
  const Evaluator* model_;
  const ItemUniverse* universe_;
  MlpRef enc_ref_, phead_ref_, chead_ref_;
  LstmRef lstm_ref_;
  std::vector<int> ids_;
  std::vector<std::vector<double>> s_;  // per-candidate encodings
  std::vector<double> h0_;
  // reusable scratch
  std::vector<double> in_, cat_, out1_;
  MlpCache enc_cache_, head_cache_;
  LstmCache lstm_cache_;
};

// Parallel scoring of many slates (results independent of thread count).
std::vector<ListScore> score_batch(const Evaluator& model,
                                   const ItemUniverse& universe,
                                   const std::vector<Slate>& slates);

// Accuracy of the evaluator at ordering list pairs whose true quality is
// known: (logged vs reversed), (logged vs shuffled), and lists with at least
// one purchase vs lists with none.  Ties count 0.5.  Throws DataError when
// fewer than `min_pairs` pairs are available for any family.
struct RequirementAccuracy {
  double acc_reversed = 0.0;
  double acc_shuffled = 0.0;
  double acc_label_separated = 0.0;
  int pairs_reversed = 0;
  int pairs_shuffled = 0;
  int pairs_label_separated = 0;
};
RequirementAccuracy requirement_check(const Evaluator& model,
                                      const Dataset& test_data,
                                      const ItemUniverse& universe,
                                      const GroundTruthRule& rule,
                                      uint64_t seed, int min_pairs = 100);

// Per-list |predicted list score - true list score|, in dataset order; the
// raw material for mean-absolute-error gaps and sorted-error curves.
std::vector<double> list_score_errors(const Evaluator& model,
                                      const Dataset& data,
                                      const ItemUniverse& universe,
                                      const GroundTruthRule& rule);

// Mean absolute error of the predicted list score against the true score on
// an on-distribution and an off-distribution set (the generalization-gap
// experiment).
struct GapResult {
  double mae_on = 0.0;
  double mae_off = 0.0;
};
GapResult generalization_gap(const Evaluator& model, const Dataset& on_data,
                             const Dataset& off_data,
                             const ItemUniverse& universe,
                             const GroundTruthRule& rule);

}  // namespace ranklab
