#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ranklab/core/mlp.hpp"
#include "ranklab/core/params.hpp"
#include "ranklab/sim/dataset.hpp"
#include "ranklab/sim/slate.hpp"
#include "ranklab/sim/universe.hpp"

namespace ranklab {

// Per-item scoring baselines: one shared MLP over [x_i ; bg] with a linear
// output, trained under interchangeable objectives.
enum class ScoringLoss {
  mse,               // squared error against the 0/1 purchase label
  cross_entropy,     // sigmoid + binary cross-entropy
  hinge,             // max(0, 1 - s z), s = +-1 from the label
  pairwise_logistic, // log(1 + exp(-(z_winner - z_loser))) over discordant pairs
  pairwise_hinge,    // max(0, 1 - (z_winner - z_loser))
  listnet,           // cross-entropy between label and score distributions
};

std::string to_string(ScoringLoss loss);
ScoringLoss scoring_loss_from_string(const std::string& s);

struct ScoringModelConfig {
  int feature_dim = 0;
  int bg_dim = 0;
  std::vector<int> widths{64, 64};  // hidden layers
  ScoringLoss loss = ScoringLoss::cross_entropy;
  double learning_rate = 1e-3;
  int batch_lists = 64;
  int max_epochs = 6;
  int patience = 2;
};

struct ScoringEpochRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct ScoringTrainResult {
  std::vector<ScoringEpochRow> epochs;
  int best_epoch = 0;
};

class ScoringModel {
 public:
  ScoringModel(ScoringModelConfig cfg, uint64_t seed);

  const ScoringModelConfig& config() const { return cfg_; }
  const ParameterSet& params() const { return params_; }
  ParameterSet& params() { return params_; }

  // Raw score (linear output) of one item under a context.
  double score_item(const ItemUniverse& universe, int item_id,
                    std::span<const double> bg) const;
  // Scores aligned with the slate's item order.
  std::vector<double> score(const ItemUniverse& universe, const Slate& slate) const;

  // Minibatch training with early stopping on validation loss; the best
  // epoch's weights are restored.  Losses are normalized per unit (item,
  // discordant pair, or usable list depending on the objective) and
  // minibatches without any unit are skipped.
  ScoringTrainResult train(const Dataset& train_data, const Dataset& val_data,
                           const ItemUniverse& universe, uint64_t seed);

  void save(const std::string& path) const;
  static ScoringModel load(const std::string& path);

 private:
  struct ListJob;

  ScoringModelConfig cfg_;
  ParameterSet params_;
  MlpSpec spec_;
};

}  // namespace ranklab
