#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ranklab/model/discriminator.hpp"
#include "ranklab/model/evaluator.hpp"
#include "ranklab/model/generator.hpp"
#include "ranklab/rank/scoring_model.hpp"
#include "ranklab/sim/rule.hpp"

namespace ranklab {

// Experiment configuration: one JSON file, strict keys, desk-scale defaults.
// Every field is optional in the file; anything omitted takes the default
// shown in the schema below (README carries the same table).
//
// {
//   "seed": 1,
//   "scenario": { "num_items", "feature_dim", "list_length", "bg_dim",
//                 "influence_mode", "alpha_start", "alpha_end",
//                 "target_mean_rate", "logit_std" },
//   "data":     { "num_lists", "train_fraction" },
//   "evaluator": { "enc_widths", "hidden", "head_widths", "click_weight",
//                  "learning_rate", "batch_lists", "max_epochs", "patience" },
//   "scoring":  { "widths", "losses", "learning_rate", "batch_lists",
//                 "max_epochs", "patience" },
//   "generator": { "senc_widths", "aenc_widths", "hidden", "head_widths",
//                  "learning_rate" },
//   "discriminator": { "enc_widths", "hidden", "head_widths" },
//   "eg":       { "iterations", "batch_episodes", "minibatch_episodes",
//                 "epochs_per_batch", "k_rollouts", "clip", "sigma_floor",
//                 "beta", "disc_minibatch_lists", "disc_learning_rate" },
//   "report":   { "methods", "eval_lists", "repeat_seeds", "enumerate_k",
//                 "curve_ks", "curve_sets" },
//   "shift":    { "num_seeds", "num_lists", "bias_strength", "noise_scale",
//                 "max_epochs" },
//   "budget":   { "max_evaluator_calls" }
// }

struct ScenarioConfig {
  int num_items = 200;
  int feature_dim = 16;
  int list_length = 10;
  int bg_dim = 4;
  InfluenceMode influence_mode = InfluenceMode::dissimilar;
  double alpha_start = 1.0;
  double alpha_end = 0.4;
  double target_mean_rate = 0.47;
  double logit_std = 1.25;
};

struct DataConfig {
  int num_lists = 50000;
  double train_fraction = 0.8;
};

struct ScoringSection {
  std::vector<int> widths{64, 64};
  std::vector<ScoringLoss> losses{
      ScoringLoss::mse,           ScoringLoss::cross_entropy,
      ScoringLoss::hinge,         ScoringLoss::pairwise_logistic,
      ScoringLoss::pairwise_hinge, ScoringLoss::listnet};
  double learning_rate = 1e-3;
  int batch_lists = 64;
  int max_epochs = 6;
  int patience = 2;
};

struct ReportSection {
  std::vector<std::string> methods;  // default: every known method
  int eval_lists = 2000;             // 0 = the whole test split
  int repeat_seeds = 3;              // label redraws per method for mean/std
  int enumerate_k = 16;              // the enumerate_<k> method in the report
  std::vector<int> curve_ks{1, 2, 5, 10, 20, 50, 100, 200, 500};
  int curve_sets = 200;
};

struct ShiftSection {
  int num_seeds = 20;
  int num_lists = 6000;
  double bias_strength = 1.0;
  double noise_scale = 0.25;
  int max_epochs = 3;
};

struct BudgetSection {
  // Estimated evaluator forward calls across the pipeline; exceeding it
  // only warns (stderr), never fails.
  double max_evaluator_calls = 2e8;
};

struct ExperimentConfig {
  uint64_t seed = 1;
  ScenarioConfig scenario;
  DataConfig data;
  EvaluatorConfig evaluator;        // feature_dim/bg_dim filled from scenario
  ScoringSection scoring;
  GeneratorConfig generator;        // feature_dim/bg_dim filled from scenario
  DiscriminatorConfig discriminator;
  EgTrainConfig eg;                 // list_length filled from scenario
  ReportSection report;
  ShiftSection shift;
  BudgetSection budget;
};

// Every method name cmd_evaluate knows how to build.
std::vector<std::string> known_methods(const ExperimentConfig& cfg);

// Parses and validates a config file; unknown keys and malformed values
// raise ConfigError naming the offending field.  `path` empty = defaults.
ExperimentConfig load_config(const std::string& path);

// The fully-resolved config as pretty JSON (the effective-config echo).
std::string effective_config_json(const ExperimentConfig& cfg);

// Estimated evaluator forward calls implied by the config; used by the
// desk-scale budget guard.
double estimated_evaluator_calls(const ExperimentConfig& cfg);

}  // namespace ranklab
