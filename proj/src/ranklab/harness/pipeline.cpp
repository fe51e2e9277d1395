#include "ranklab/harness/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "ranklab/core/error.hpp"
#include "ranklab/core/parallel.hpp"
#include "ranklab/core/rng.hpp"
#include "ranklab/harness/csv.hpp"
#include "ranklab/harness/manifest.hpp"
#include "ranklab/harness/svg.hpp"
#include "ranklab/metric/report.hpp"
#include "ranklab/model/discriminator.hpp"
#include "ranklab/model/evaluator.hpp"
#include "ranklab/model/generator.hpp"
#include "ranklab/rank/enumerate.hpp"
#include "ranklab/rank/rankers.hpp"
#include "ranklab/rank/scoring_model.hpp"
#include "ranklab/sim/dataset.hpp"

namespace ranklab {

namespace fs = std::filesystem;

namespace artifact {
std::string scoring_checkpoint(ScoringLoss loss) {
  return "scoring_" + to_string(loss) + ".ckpt";
}
}  // namespace artifact

namespace {

std::string join_path(const std::string& dir, const std::string& rel) {
  if (dir.empty()) return rel;
  if (dir.back() == '/') return dir + rel;
  return dir + "/" + rel;
}

bool file_exists(const std::string& path) {
  std::error_code ec;
  return fs::exists(path, ec);
}

class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void write_effective_config(const ExperimentConfig& cfg,
                            const std::string& out_dir) {
  const std::string path = join_path(out_dir, artifact::kEffectiveConfig);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << effective_config_json(cfg);
  out.flush();
  if (!out) throw IoError("write error on '" + path + "'");
}

void finish_stage(const ExperimentConfig& cfg, const std::string& out_dir,
                  const std::string& name, uint64_t stage_seed, double wall,
                  std::vector<std::string> files) {
  files.insert(files.begin(), artifact::kEffectiveConfig);
  RunManifest manifest = RunManifest::load_or_create(out_dir);
  manifest.set_config(effective_config_json(cfg));
  manifest.record_stage(out_dir, name, stage_seed, wall, files);
  manifest.save(out_dir);
}

struct Prereq {
  std::string file;
  std::string hint;  // the command that produces it
};

void require_artifacts(const std::string& out_dir, const std::string& stage,
                       const std::vector<Prereq>& reqs) {
  std::string missing;
  for (const Prereq& r : reqs) {
    if (file_exists(join_path(out_dir, r.file))) continue;
    if (!missing.empty()) missing += "; ";
    missing += r.file + " (run `ranklab " + r.hint + "` first)";
  }
  if (!missing.empty())
    throw PipelineError("stage " + stage +
                        " is missing prerequisites: " + missing);
}

// Carves a validation split off the tail of a training dataset (9:1).
std::pair<Dataset, Dataset> split_train_val(const Dataset& full) {
  Dataset tr = full;
  Dataset val = full;
  tr.slates.clear();
  val.slates.clear();
  val.split = "val";
  const int n = full.size();
  const int n_val = n >= 2 ? std::max(1, n / 10) : 0;
  for (int i = 0; i < n; ++i) {
    if (i < n - n_val)
      tr.slates.push_back(full.slates[static_cast<size_t>(i)]);
    else
      val.slates.push_back(full.slates[static_cast<size_t>(i)]);
  }
  return {std::move(tr), std::move(val)};
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

void stage_gen_data(const ExperimentConfig& cfg, const std::string& out_dir) {
  StageTimer timer;
  const uint64_t stage_seed = mix_seed(cfg.seed, "gen-data");
  write_effective_config(cfg, out_dir);

  const ScenarioConfig& sc = cfg.scenario;
  ItemUniverse universe = build_universe(sc.num_items, sc.feature_dim,
                                         mix_seed(stage_seed, "universe"));
  RuleOptions ropts;
  ropts.alpha_start = sc.alpha_start;
  ropts.alpha_end = sc.alpha_end;
  ropts.mode = sc.influence_mode;
  ropts.target_mean_rate = sc.target_mean_rate;
  ropts.logit_std = sc.logit_std;
  GroundTruthRule rule =
      build_rule(universe, sc.list_length, mix_seed(stage_seed, "rule"), ropts);

  GenerateOptions gopts;
  gopts.num_lists = cfg.data.num_lists;
  gopts.list_length = sc.list_length;
  gopts.train_fraction = cfg.data.train_fraction;
  gopts.bg_dim = sc.bg_dim;
  auto [train, test] =
      generate_dataset(universe, rule, gopts, mix_seed(stage_seed, "lists"));

  save_universe(join_path(out_dir, artifact::kUniverse), universe);
  save_rule(join_path(out_dir, artifact::kRule), rule);
  save_dataset(join_path(out_dir, artifact::kTrainLists), train);
  save_dataset(join_path(out_dir, artifact::kTestLists), test);

  CsvFile profile(join_path(out_dir, artifact::kPositionProfile),
                  {"position", "mean_true_rate"});
  if (train.size() > 0) {
    const std::vector<double> p = position_profile(train, rule, universe);
    for (std::size_t i = 0; i < p.size(); ++i)
      profile.row({csv_num(static_cast<int>(i) + 1), csv_num(p[i])});
    std::cout << "[gen-data] position profile " << csv_num(p.front()) << " -> "
              << csv_num(p.back()) << "\n";
  }
  profile.close();

  std::cout << "[gen-data] M=" << sc.num_items << " d=" << sc.feature_dim
            << " N=" << sc.list_length << "; " << train.size() << " train / "
            << test.size() << " test lists\n";
  finish_stage(cfg, out_dir, "gen-data", stage_seed, timer.seconds(),
               {artifact::kUniverse, artifact::kRule, artifact::kTrainLists,
                artifact::kTestLists, artifact::kPositionProfile});
}

// ---------------------------------------------------------------------------
// train --stage evaluator
// ---------------------------------------------------------------------------

void stage_train_evaluator(const ExperimentConfig& cfg,
                           const std::string& out_dir) {
  require_artifacts(out_dir, "train --stage evaluator",
                    {{artifact::kUniverse, "gen-data"},
                     {artifact::kRule, "gen-data"},
                     {artifact::kTrainLists, "gen-data"},
                     {artifact::kTestLists, "gen-data"}});
  StageTimer timer;
  const uint64_t stage_seed = mix_seed(cfg.seed, "train-evaluator");
  write_effective_config(cfg, out_dir);

  ItemUniverse universe =
      load_universe(join_path(out_dir, artifact::kUniverse));
  GroundTruthRule rule = load_rule(join_path(out_dir, artifact::kRule));
  Dataset full_train = load_dataset(join_path(out_dir, artifact::kTrainLists));
  Dataset test = load_dataset(join_path(out_dir, artifact::kTestLists));
  auto [train, val] = split_train_val(full_train);

  Evaluator model(cfg.evaluator, stage_seed);
  TrainResult result =
      model.train(train, val, universe, mix_seed(stage_seed, "train"));
  model.save(join_path(out_dir, artifact::kEvaluator));

  CsvFile trace(join_path(out_dir, artifact::kEvaluatorTrace),
                {"epoch", "train_loss", "val_loss"});
  for (const EpochRow& row : result.epochs)
    trace.row({csv_num(row.epoch), csv_num(row.train_loss),
               csv_num(row.val_loss)});
  trace.close();

  // Desk-scale splits clear the default 100-pair floor; smaller runs would
  // starve the label-separated family (few zero-purchase lists), so the
  // floor shrinks with the split instead of failing the stage.
  const int min_pairs = std::min(100, std::max(2, test.size() / 12));
  RequirementAccuracy req =
      requirement_check(model, test, universe, rule,
                        mix_seed(stage_seed, "requirements"), min_pairs);
  CsvFile reqcsv(join_path(out_dir, artifact::kEvaluatorRequirements),
                 {"acc_reversed", "acc_shuffled", "acc_label_separated",
                  "pairs_reversed", "pairs_shuffled", "pairs_label_separated"});
  reqcsv.row({csv_num(req.acc_reversed), csv_num(req.acc_shuffled),
              csv_num(req.acc_label_separated), csv_num(req.pairs_reversed),
              csv_num(req.pairs_shuffled),
              csv_num(req.pairs_label_separated)});
  reqcsv.close();

  std::cout << "[train evaluator] best epoch " << result.best_epoch
            << ", click weight " << csv_num(result.click_weight_used)
            << "; requirements: reversed " << csv_num(req.acc_reversed)
            << ", shuffled " << csv_num(req.acc_shuffled)
            << ", label-separated " << csv_num(req.acc_label_separated)
            << "\n";
  finish_stage(cfg, out_dir, "train-evaluator", stage_seed, timer.seconds(),
               {artifact::kEvaluator, artifact::kEvaluatorTrace,
                artifact::kEvaluatorRequirements});
}

// ---------------------------------------------------------------------------
// train --stage baselines
// ---------------------------------------------------------------------------

void stage_train_baselines(const ExperimentConfig& cfg,
                           const std::string& out_dir) {
  require_artifacts(out_dir, "train --stage baselines",
                    {{artifact::kUniverse, "gen-data"},
                     {artifact::kTrainLists, "gen-data"}});
  StageTimer timer;
  const uint64_t stage_seed = mix_seed(cfg.seed, "train-baselines");
  write_effective_config(cfg, out_dir);

  ItemUniverse universe =
      load_universe(join_path(out_dir, artifact::kUniverse));
  Dataset full_train = load_dataset(join_path(out_dir, artifact::kTrainLists));
  auto [train, val] = split_train_val(full_train);

  std::vector<std::string> files;
  CsvFile traces(join_path(out_dir, artifact::kScoringTraces),
                 {"loss", "epoch", "train_loss", "val_loss"});
  for (ScoringLoss loss : cfg.scoring.losses) {
    ScoringModelConfig mc;
    mc.feature_dim = cfg.scenario.feature_dim;
    mc.bg_dim = cfg.scenario.bg_dim;
    mc.widths = cfg.scoring.widths;
    mc.loss = loss;
    mc.learning_rate = cfg.scoring.learning_rate;
    mc.batch_lists = cfg.scoring.batch_lists;
    mc.max_epochs = cfg.scoring.max_epochs;
    mc.patience = cfg.scoring.patience;
    ScoringModel model(mc, stage_seed);
    ScoringTrainResult result =
        model.train(train, val, universe, mix_seed(stage_seed, "train"));
    const std::string ckpt = artifact::scoring_checkpoint(loss);
    model.save(join_path(out_dir, ckpt));
    files.push_back(ckpt);
    for (const ScoringEpochRow& row : result.epochs)
      traces.row({to_string(loss), csv_num(row.epoch), csv_num(row.train_loss),
                  csv_num(row.val_loss)});
    std::cout << "[train baselines] " << to_string(loss) << ": best epoch "
              << result.best_epoch << "\n";
  }
  traces.close();
  files.push_back(artifact::kScoringTraces);
  finish_stage(cfg, out_dir, "train-baselines", stage_seed, timer.seconds(),
               std::move(files));
}

// ---------------------------------------------------------------------------
// train --stage eg_rerank / eg_rerank_plus
// ---------------------------------------------------------------------------

void stage_train_eg(const ExperimentConfig& cfg, const std::string& out_dir) {
  require_artifacts(out_dir, "train --stage eg_rerank",
                    {{artifact::kUniverse, "gen-data"},
                     {artifact::kRule, "gen-data"},
                     {artifact::kEvaluator, "train --stage evaluator"}});
  StageTimer timer;
  const uint64_t stage_seed = mix_seed(cfg.seed, "train-eg-rerank");
  write_effective_config(cfg, out_dir);

  ItemUniverse universe =
      load_universe(join_path(out_dir, artifact::kUniverse));
  GroundTruthRule rule = load_rule(join_path(out_dir, artifact::kRule));
  Evaluator evaluator =
      Evaluator::load(join_path(out_dir, artifact::kEvaluator));
  RuleScorer truth(rule, universe);

  Generator model(cfg.generator, stage_seed);
  EgRunResult result = train_eg_rerank(evaluator, universe, model, cfg.eg,
                                       mix_seed(stage_seed, "train"), &truth);
  model.save(join_path(out_dir, artifact::kEgGenerator));

  CsvFile trace(join_path(out_dir, artifact::kEgTrace),
                {"iteration", "mean_evaluator_score", "mean_true_score"});
  for (const EgTraceRow& row : result.trace)
    trace.row({csv_num(row.iteration), csv_num(row.mean_evaluator_score),
               csv_num(row.mean_true_score)});
  trace.close();

  if (!result.trace.empty())
    std::cout << "[train eg_rerank] mean evaluator score "
              << csv_num(result.trace.front().mean_evaluator_score) << " -> "
              << csv_num(result.trace.back().mean_evaluator_score) << " over "
              << result.trace.size() << " iterations\n";
  finish_stage(cfg, out_dir, "train-eg-rerank", stage_seed, timer.seconds(),
               {artifact::kEgGenerator, artifact::kEgTrace});
}

void stage_train_eg_plus(const ExperimentConfig& cfg,
                         const std::string& out_dir) {
  require_artifacts(out_dir, "train --stage eg_rerank_plus",
                    {{artifact::kUniverse, "gen-data"},
                     {artifact::kRule, "gen-data"},
                     {artifact::kTrainLists, "gen-data"},
                     {artifact::kEvaluator, "train --stage evaluator"}});
  StageTimer timer;
  const uint64_t stage_seed = mix_seed(cfg.seed, "train-eg-rerank-plus");
  write_effective_config(cfg, out_dir);

  ItemUniverse universe =
      load_universe(join_path(out_dir, artifact::kUniverse));
  GroundTruthRule rule = load_rule(join_path(out_dir, artifact::kRule));
  Evaluator evaluator =
      Evaluator::load(join_path(out_dir, artifact::kEvaluator));
  Dataset real = load_dataset(join_path(out_dir, artifact::kTrainLists));
  RuleScorer truth(rule, universe);

  Generator model(cfg.generator, stage_seed);
  Discriminator disc(cfg.discriminator, stage_seed);
  EgRunResult result =
      train_eg_rerank_plus(evaluator, universe, model, disc, real, cfg.eg,
                           mix_seed(stage_seed, "train"), &truth);
  model.save(join_path(out_dir, artifact::kEgpGenerator));
  disc.save(join_path(out_dir, artifact::kEgpDiscriminator));

  CsvFile trace(join_path(out_dir, artifact::kEgpTrace),
                {"iteration", "mean_shaped_return", "mean_evaluator_score",
                 "mean_true_score", "discriminator_accuracy",
                 "distribution_distance"});
  for (const EgTraceRow& row : result.trace)
    trace.row({csv_num(row.iteration), csv_num(row.mean_shaped_return),
               csv_num(row.mean_evaluator_score), csv_num(row.mean_true_score),
               csv_num(row.discriminator_accuracy),
               csv_num(row.distribution_distance)});
  trace.close();

  if (!result.trace.empty())
    std::cout << "[train eg_rerank_plus] mean evaluator score "
              << csv_num(result.trace.front().mean_evaluator_score) << " -> "
              << csv_num(result.trace.back().mean_evaluator_score)
              << "; distribution distance "
              << csv_num(result.trace.front().distribution_distance) << " -> "
              << csv_num(result.trace.back().distribution_distance) << "\n";
  if (result.warnings_imbalance > 0)
    std::cout << "[train eg_rerank_plus] warning: discriminator accuracy "
                 "saturated in "
              << result.warnings_imbalance << " iterations\n";
  finish_stage(cfg, out_dir, "train-eg-rerank-plus", stage_seed,
               timer.seconds(),
               {artifact::kEgpGenerator, artifact::kEgpDiscriminator,
                artifact::kEgpTrace});
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

Dataset slice_dataset(const Dataset& full, int start, int count) {
  Dataset out = full;
  out.slates.clear();
  if (full.size() == 0 || count <= 0) return out;
  for (int k = 0; k < count; ++k)
    out.slates.push_back(
        full.slates[static_cast<size_t>((start + k) % full.size())]);
  return out;
}

bool is_scoring_method(const std::string& name) {
  for (ScoringLoss loss :
       {ScoringLoss::mse, ScoringLoss::cross_entropy, ScoringLoss::hinge,
        ScoringLoss::pairwise_logistic, ScoringLoss::pairwise_hinge,
        ScoringLoss::listnet})
    if (name == to_string(loss)) return true;
  return false;
}

void stage_evaluate(const ExperimentConfig& cfg, const std::string& out_dir) {
  require_artifacts(out_dir, "evaluate",
                    {{artifact::kUniverse, "gen-data"},
                     {artifact::kRule, "gen-data"},
                     {artifact::kTestLists, "gen-data"}});

  // Map every requested method onto the checkpoints it needs and report all
  // gaps in one message.
  bool needs_evaluator_method = false;
  std::vector<Prereq> wanted;
  for (const std::string& m : cfg.report.methods) {
    if (is_scoring_method(m)) {
      wanted.push_back({artifact::scoring_checkpoint(scoring_loss_from_string(m)),
                        "train --stage baselines"});
    } else if (m == "direct_e" || m == "greedy_e" ||
               m.rfind("enumerate_", 0) == 0) {
      needs_evaluator_method = true;
    } else if (m == "eg_rerank") {
      wanted.push_back({artifact::kEgGenerator, "train --stage eg_rerank"});
    } else if (m == "eg_rerank_plus") {
      wanted.push_back(
          {artifact::kEgpGenerator, "train --stage eg_rerank_plus"});
    }
  }
  if (needs_evaluator_method)
    wanted.push_back({artifact::kEvaluator, "train --stage evaluator"});
  require_artifacts(out_dir, "evaluate", wanted);

  StageTimer timer;
  const uint64_t stage_seed = mix_seed(cfg.seed, "evaluate");
  write_effective_config(cfg, out_dir);

  ItemUniverse universe =
      load_universe(join_path(out_dir, artifact::kUniverse));
  GroundTruthRule rule = load_rule(join_path(out_dir, artifact::kRule));
  Dataset test = load_dataset(join_path(out_dir, artifact::kTestLists));
  RuleScorer truth(rule, universe);

  // The evaluator-score column always needs a model; fall back to an
  // untrained one only when nothing was trained and no method requires it.
  std::optional<Evaluator> evaluator;
  if (file_exists(join_path(out_dir, artifact::kEvaluator))) {
    evaluator.emplace(Evaluator::load(join_path(out_dir, artifact::kEvaluator)));
  } else {
    EvaluatorConfig ec = cfg.evaluator;
    evaluator.emplace(ec, mix_seed(stage_seed, "untrained-evaluator"));
    std::cout << "[evaluate] note: no evaluator checkpoint; evaluator-score "
                 "columns use an untrained model\n";
  }

  // Build the method set.  Owning storage must outlive the rankers.
  std::vector<std::unique_ptr<ScoringModel>> scoring_models;
  std::optional<Generator> eg_model, egp_model;
  std::vector<std::unique_ptr<Ranker>> rankers;
  for (const std::string& m : cfg.report.methods) {
    if (m == "identity") {
      rankers.push_back(std::make_unique<IdentityRanker>());
    } else if (m == "reverse") {
      rankers.push_back(std::make_unique<ReverseRanker>());
    } else if (m == "random") {
      rankers.push_back(
          std::make_unique<RandomRanker>(mix_seed(stage_seed, "random-method")));
    } else if (is_scoring_method(m)) {
      scoring_models.push_back(std::make_unique<ScoringModel>(
          ScoringModel::load(join_path(
              out_dir,
              artifact::scoring_checkpoint(scoring_loss_from_string(m))))));
      rankers.push_back(std::make_unique<ScoringModelRanker>(
          *scoring_models.back(), universe));
    } else if (m == "direct_e") {
      rankers.push_back(std::make_unique<DirectERanker>(*evaluator, universe));
    } else if (m == "greedy_e") {
      rankers.push_back(std::make_unique<GreedyERanker>(*evaluator, universe));
    } else if (m.rfind("enumerate_", 0) == 0) {
      rankers.push_back(std::make_unique<EnumerateKRanker>(
          *evaluator, universe, cfg.report.enumerate_k,
          mix_seed(stage_seed, "enumerate-method")));
    } else if (m == "eg_rerank") {
      eg_model.emplace(
          Generator::load(join_path(out_dir, artifact::kEgGenerator)));
      rankers.push_back(
          std::make_unique<PolicyRanker>(*eg_model, universe, "eg_rerank"));
    } else if (m == "eg_rerank_plus") {
      egp_model.emplace(
          Generator::load(join_path(out_dir, artifact::kEgpGenerator)));
      rankers.push_back(std::make_unique<PolicyRanker>(*egp_model, universe,
                                                       "eg_rerank_plus"));
    } else {
      throw ConfigError("unknown method '" + m + "' in report.methods");
    }
  }
  std::vector<const Ranker*> methods;
  for (const auto& r : rankers) methods.push_back(r.get());

  // Repeat the evaluation over rotating test slices so the mean/std columns
  // reflect independent data, mirroring repeated online experiments.
  const int reps = cfg.report.repeat_seeds;
  const int per_rep = cfg.report.eval_lists > 0
                          ? std::min(cfg.report.eval_lists, test.size())
                          : test.size();
  const int n_methods = static_cast<int>(methods.size());
  constexpr int kCols = 5;
  std::vector<std::vector<std::vector<double>>> samples(
      static_cast<size_t>(n_methods),
      std::vector<std::vector<double>>(kCols));
  std::vector<MethodReport> first_rep;
  for (int j = 0; j < reps; ++j) {
    const Dataset slice =
        slice_dataset(test, cfg.report.eval_lists > 0 ? j * per_rep : 0,
                      per_rep);
    const std::vector<MethodReport> reports =
        evaluate_methods(methods, slice, universe, rule, *evaluator,
                         mix_seed(mix_seed(stage_seed, "rep"),
                                  static_cast<uint64_t>(j)));
    if (j == 0) first_rep = reports;
    for (int i = 0; i < n_methods; ++i) {
      const MethodReport& r = reports[static_cast<size_t>(i)];
      samples[i][0].push_back(r.offline_gauc);
      samples[i][1].push_back(r.ndcg);
      samples[i][2].push_back(r.online_gauc);
      samples[i][3].push_back(r.evaluator_score);
      samples[i][4].push_back(r.true_score);
    }
  }

  const auto col_mean = [&](int i, int c) { return mean_of(samples[i][c]); };
  const auto col_std = [&](int i, int c) {
    const std::vector<double>& v = samples[i][c];
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
  };

  // Headline inequality: an EG policy whose simulator score beats the best
  // supervised baseline by >= 5% while trailing it on offline GAUC by
  // >= 0.05 — the offline-online inconsistency this lab exists to show.
  int best_supervised = -1;
  for (int i = 0; i < n_methods; ++i) {
    if (!is_scoring_method(methods[static_cast<size_t>(i)]->name())) continue;
    if (best_supervised < 0 || col_mean(i, 4) > col_mean(best_supervised, 4))
      best_supervised = i;
  }
  std::vector<int> headline(static_cast<size_t>(n_methods), 0);
  for (int i = 0; i < n_methods; ++i) {
    const std::string name = methods[static_cast<size_t>(i)]->name();
    if (name != "eg_rerank" && name != "eg_rerank_plus") continue;
    if (best_supervised < 0) continue;
    const double best_true = col_mean(best_supervised, 4);
    const double best_gauc = col_mean(best_supervised, 0);
    const bool holds = best_true > 0.0 &&
                       col_mean(i, 4) >= 1.05 * best_true &&
                       col_mean(i, 0) <= best_gauc - 0.05;
    headline[static_cast<size_t>(i)] = holds ? 1 : 0;
    std::cout << "[evaluate] headline " << name << ": true "
              << csv_num(col_mean(i, 4)) << " vs best supervised ("
              << methods[static_cast<size_t>(best_supervised)]->name() << ") "
              << csv_num(best_true) << ", offline gauc "
              << csv_num(col_mean(i, 0)) << " vs " << csv_num(best_gauc)
              << " -> inequality " << (holds ? "holds" : "does not hold")
              << "\n";
  }

  CsvFile report(join_path(out_dir, artifact::kReport),
                 {"method", "offline_gauc_mean", "offline_gauc_std",
                  "ndcg_mean", "ndcg_std", "online_gauc_mean",
                  "online_gauc_std", "evaluator_score_mean",
                  "evaluator_score_std", "true_score_mean", "true_score_std",
                  "headline"});
  for (int i = 0; i < n_methods; ++i) {
    report.row({methods[static_cast<size_t>(i)]->name(),
                csv_num(col_mean(i, 0)), csv_num(col_std(i, 0)),
                csv_num(col_mean(i, 1)), csv_num(col_std(i, 1)),
                csv_num(col_mean(i, 2)), csv_num(col_std(i, 2)),
                csv_num(col_mean(i, 3)), csv_num(col_std(i, 3)),
                csv_num(col_mean(i, 4)), csv_num(col_std(i, 4)),
                csv_num(headline[static_cast<size_t>(i)])});
  }
  report.close();

  std::vector<std::string> files{artifact::kReport};

  if (n_methods >= 3) {
    std::vector<MethodReport> means = first_rep;
    for (int i = 0; i < n_methods; ++i) {
      means[static_cast<size_t>(i)].offline_gauc = col_mean(i, 0);
      means[static_cast<size_t>(i)].ndcg = col_mean(i, 1);
      means[static_cast<size_t>(i)].online_gauc = col_mean(i, 2);
      means[static_cast<size_t>(i)].evaluator_score = col_mean(i, 3);
      means[static_cast<size_t>(i)].true_score = col_mean(i, 4);
    }
    const ConsistencyMatrix matrix = report_consistency(means);
    std::vector<std::string> header{"metric"};
    header.insert(header.end(), matrix.metric_names.begin(),
                  matrix.metric_names.end());
    CsvFile mcsv(join_path(out_dir, artifact::kConsistencyMatrix), header);
    for (std::size_t r = 0; r < matrix.metric_names.size(); ++r) {
      std::vector<std::string> row{matrix.metric_names[r]};
      for (double v : matrix.distance[r]) row.push_back(csv_num(v));
      mcsv.row(row);
    }
    mcsv.close();
    files.push_back(artifact::kConsistencyMatrix);
    std::cout << "[evaluate] tau distance to true score: offline gauc "
              << csv_num(matrix.at("offline_gauc", "true_score"))
              << ", evaluator score "
              << csv_num(matrix.at("evaluator_score", "true_score")) << "\n";
  } else {
    std::cout << "[evaluate] fewer than 3 methods; consistency matrix "
                 "skipped\n";
  }

  // ENUMERATE-k curve plus the EG-Rerank+ level line (falling back to
  // EG-Rerank when only that checkpoint exists).
  const std::vector<double> bg = constant_bg(cfg.scenario.bg_dim);
  const std::vector<EnumerateCurvePoint> curve = enumerate_curve(
      *evaluator, truth, universe, cfg.report.curve_ks, cfg.report.curve_sets,
      cfg.scenario.list_length, bg, mix_seed(stage_seed, "curve"));
  CsvFile curvecsv(join_path(out_dir, artifact::kEnumerateCurve),
                   {"k", "mean_true_score", "stderr_true_score",
                    "mean_evaluator_score", "best_of_n_quantile"});
  for (const EnumerateCurvePoint& p : curve)
    curvecsv.row({csv_num(p.k), csv_num(p.mean_true_score),
                  csv_num(p.stderr_true_score),
                  csv_num(p.mean_evaluator_score),
                  csv_num(best_of_n_quantile(p.k))});
  curvecsv.close();
  files.push_back(artifact::kEnumerateCurve);

  std::string level_method = "none";
  double level = std::numeric_limits<double>::quiet_NaN();
  std::optional<Generator> level_model;
  if (file_exists(join_path(out_dir, artifact::kEgpGenerator))) {
    level_method = "eg_rerank_plus";
    level_model.emplace(
        Generator::load(join_path(out_dir, artifact::kEgpGenerator)));
  } else if (file_exists(join_path(out_dir, artifact::kEgGenerator))) {
    level_method = "eg_rerank";
    level_model.emplace(
        Generator::load(join_path(out_dir, artifact::kEgGenerator)));
  }
  int crossing_k = -1;
  if (level_model) {
    const uint64_t level_seed = mix_seed(stage_seed, "level");
    std::vector<double> vals(static_cast<size_t>(cfg.report.curve_sets));
    parallel_for(cfg.report.curve_sets, [&](int64_t c) {
      Rng rng(mix_seed(level_seed, static_cast<uint64_t>(c)));
      const std::vector<int> ids =
          sample_distinct(universe.num_items, cfg.scenario.list_length, rng);
      const Trajectory t =
          rollout(*level_model, *evaluator, universe, ids, bg,
                  RolloutMode::greedy, rng);
      vals[static_cast<size_t>(c)] = t.evaluator_score();
    });
    level = mean_of(vals);
    for (const EnumerateCurvePoint& p : curve)
      if (p.mean_evaluator_score >= level) {
        crossing_k = p.k;
        break;
      }
    std::cout << "[evaluate] enumerate-k crossing vs " << level_method
              << " level " << csv_num(level) << ": "
              << (crossing_k > 0 ? "k=" + std::to_string(crossing_k)
                                 : std::string("not reached"))
              << "\n";
  }
  CsvFile crosscsv(join_path(out_dir, artifact::kEnumerateCrossing),
                   {"level_method", "level_mean_evaluator_score",
                    "crossing_k"});
  crosscsv.row({level_method, csv_num(level), csv_num(crossing_k)});
  crosscsv.close();
  files.push_back(artifact::kEnumerateCrossing);

  SvgPlot plot;
  plot.title = "ENUMERATE-k: best of k sampled orders under the evaluator";
  plot.x_label = "k (log scale)";
  plot.y_label = "mean list score over candidate sets";
  plot.log_x = true;
  SvgSeries true_series;
  true_series.label = "enumerate-k true score";
  true_series.color = "#1f77b4";
  SvgSeries eval_series;
  eval_series.label = "enumerate-k evaluator score";
  eval_series.color = "#2ca02c";
  for (const EnumerateCurvePoint& p : curve) {
    true_series.x.push_back(p.k);
    true_series.y.push_back(p.mean_true_score);
    true_series.y_err.push_back(p.stderr_true_score);
    eval_series.x.push_back(p.k);
    eval_series.y.push_back(p.mean_evaluator_score);
  }
  plot.series.push_back(std::move(true_series));
  plot.series.push_back(std::move(eval_series));
  if (level_model) {
    SvgRefLine ref;
    ref.y = level;
    ref.label = level_method + " evaluator level" +
                (crossing_k > 0
                     ? " (crossed at k=" + std::to_string(crossing_k) + ")"
                     : " (not crossed)");
    plot.ref_lines.push_back(std::move(ref));
  }
  write_svg_plot(join_path(out_dir, artifact::kEnumerateCurveSvg), plot);
  files.push_back(artifact::kEnumerateCurveSvg);

  finish_stage(cfg, out_dir, "evaluate", stage_seed, timer.seconds(),
               std::move(files));
}

// ---------------------------------------------------------------------------
// shift-study
// ---------------------------------------------------------------------------

// Logging policy for the biased split: candidates are ordered by
// bias_strength * (w . x) + noise_scale * eps with w fixed per seed, i.e. a
// noisy linear heuristic standing in for the production ranker whose logs
// the evaluator would be trained on.
Slate biased_slate(const ItemUniverse& universe, const GroundTruthRule& rule,
                   const ShiftSection& shift, std::span<const double> w,
                   std::span<const double> bg, int list_length, Rng& rng) {
  const std::vector<int> ids =
      sample_distinct(universe.num_items, list_length, rng);
  std::vector<double> score(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::span<const double> x = universe.item(ids[i]);
    double dot = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) dot += w[k] * x[k];
    score[i] = shift.bias_strength * dot + shift.noise_scale * rng.normal();
  }
  std::vector<int> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return score[a] > score[b]; });
  Slate slate;
  for (int idx : order) slate.item_ids.push_back(ids[static_cast<size_t>(idx)]);
  slate.bg.assign(bg.begin(), bg.end());
  const SampledLabels labels = sample_labels(rule, universe, slate, rng);
  slate.purchase_labels = labels.purchase;
  slate.click_labels = labels.click;
  return slate;
}

void stage_shift_study(const ExperimentConfig& cfg,
                       const std::string& out_dir) {
  require_artifacts(out_dir, "shift-study",
                    {{artifact::kUniverse, "gen-data"},
                     {artifact::kRule, "gen-data"}});
  StageTimer timer;
  const uint64_t stage_seed = mix_seed(cfg.seed, "shift-study");
  write_effective_config(cfg, out_dir);

  ItemUniverse universe =
      load_universe(join_path(out_dir, artifact::kUniverse));
  GroundTruthRule rule = load_rule(join_path(out_dir, artifact::kRule));
  const ShiftSection& shift = cfg.shift;
  const int N = cfg.scenario.list_length;
  const std::vector<double> bg = constant_bg(cfg.scenario.bg_dim);

  const int n_lists = shift.num_lists;
  const int n_train = (n_lists * 7) / 10;
  const int n_val = n_lists / 10;
  const int n_test = n_lists - n_train - n_val;

  CsvFile study(join_path(out_dir, artifact::kShiftStudy),
                {"seed_index", "mae_on", "mae_off", "gap", "off_higher"});
  std::vector<double> curve_on_first, curve_off_first;
  std::vector<double> curve_on_sum, curve_off_sum;
  int off_higher_count = 0;
  for (int s = 0; s < shift.num_seeds; ++s) {
    const uint64_t sseed =
        mix_seed(mix_seed(stage_seed, "seed"), static_cast<uint64_t>(s));
    Rng heuristic_rng(mix_seed(sseed, "heuristic"));
    std::vector<double> w(static_cast<size_t>(universe.feature_dim));
    for (double& v : w) v = heuristic_rng.normal();

    Dataset biased_train, biased_val, biased_test;
    for (Dataset* d : {&biased_train, &biased_val, &biased_test}) {
      d->universe_seed = universe.seed;
      d->rule_seed = rule.seed;
      d->generation_seed = sseed;
      d->list_length = N;
      d->num_items = universe.num_items;
      d->feature_dim = universe.feature_dim;
      d->bg_dim = cfg.scenario.bg_dim;
    }
    biased_train.split = "train";
    biased_val.split = "val";
    biased_test.split = "test";
    std::vector<Slate> biased(static_cast<size_t>(n_lists));
    parallel_for(n_lists, [&](int64_t i) {
      Rng rng(mix_seed(mix_seed(sseed, "biased"), static_cast<uint64_t>(i)));
      biased[static_cast<size_t>(i)] =
          biased_slate(universe, rule, shift, w, bg, N, rng);
    });
    for (int i = 0; i < n_lists; ++i) {
      Slate& sl = biased[static_cast<size_t>(i)];
      if (i < n_train)
        biased_train.slates.push_back(std::move(sl));
      else if (i < n_train + n_val)
        biased_val.slates.push_back(std::move(sl));
      else
        biased_test.slates.push_back(std::move(sl));
    }

    GenerateOptions uopts;
    uopts.num_lists = n_test;
    uopts.list_length = N;
    uopts.train_fraction = 0.0;
    uopts.bg_dim = cfg.scenario.bg_dim;
    const Dataset uniform_test =
        generate_dataset(universe, rule, uopts, mix_seed(sseed, "uniform"))
            .second;

    EvaluatorConfig ec = cfg.evaluator;
    ec.max_epochs = shift.max_epochs;
    ec.patience = std::min(ec.patience, shift.max_epochs);
    Evaluator model(ec, mix_seed(sseed, "model"));
    model.train(biased_train, biased_val, universe, mix_seed(sseed, "train"));

    std::vector<double> err_on =
        list_score_errors(model, biased_test, universe, rule);
    std::vector<double> err_off =
        list_score_errors(model, uniform_test, universe, rule);
    const double mae_on = mean_of(err_on);
    const double mae_off = mean_of(err_off);
    if (mae_off > mae_on) ++off_higher_count;
    study.row({csv_num(s), csv_num(mae_on), csv_num(mae_off),
               csv_num(mae_off - mae_on), csv_num(mae_off > mae_on ? 1 : 0)});

    std::sort(err_on.begin(), err_on.end(), std::greater<>());
    std::sort(err_off.begin(), err_off.end(), std::greater<>());
    if (s == 0) {
      curve_on_first = err_on;
      curve_off_first = err_off;
      curve_on_sum.assign(err_on.size(), 0.0);
      curve_off_sum.assign(err_off.size(), 0.0);
    }
    for (std::size_t i = 0; i < err_on.size(); ++i) curve_on_sum[i] += err_on[i];
    for (std::size_t i = 0; i < err_off.size(); ++i)
      curve_off_sum[i] += err_off[i];
  }
  study.close();

  CsvFile curves(join_path(out_dir, artifact::kShiftErrorCurves),
                 {"rank", "error_on_seed0", "error_off_seed0", "error_on_mean",
                  "error_off_mean"});
  std::vector<double> mean_on(curve_on_sum.size()), mean_off(curve_off_sum.size());
  for (std::size_t i = 0; i < curve_on_sum.size(); ++i) {
    mean_on[i] = curve_on_sum[i] / shift.num_seeds;
    mean_off[i] = curve_off_sum[i] / shift.num_seeds;
    curves.row({csv_num(static_cast<int>(i) + 1), csv_num(curve_on_first[i]),
                csv_num(curve_off_first[i]), csv_num(mean_on[i]),
                csv_num(mean_off[i])});
  }
  curves.close();

  CsvFile quant(join_path(out_dir, artifact::kShiftQuantiles),
                {"k", "best_of_n_quantile"});
  for (int k : cfg.report.curve_ks)
    quant.row({csv_num(k), csv_num(best_of_n_quantile(k))});
  quant.close();

  SvgPlot plot;
  plot.title = "Evaluator absolute error, sorted per list (mean over seeds)";
  plot.x_label = "list rank (errors sorted descending)";
  plot.y_label = "absolute list-score error";
  SvgSeries on_series;
  on_series.label = "seen distribution (biased logs)";
  on_series.color = "#1f77b4";
  on_series.markers = false;
  SvgSeries off_series;
  off_series.label = "unseen distribution (uniform lists)";
  off_series.color = "#d62728";
  off_series.markers = false;
  for (std::size_t i = 0; i < mean_on.size(); ++i) {
    on_series.x.push_back(static_cast<double>(i + 1));
    on_series.y.push_back(mean_on[i]);
    off_series.x.push_back(static_cast<double>(i + 1));
    off_series.y.push_back(mean_off[i]);
  }
  plot.series.push_back(std::move(off_series));
  plot.series.push_back(std::move(on_series));
  write_svg_plot(join_path(out_dir, artifact::kShiftErrorCurvesSvg), plot);

  std::cout << "[shift-study] mae_off > mae_on in " << off_higher_count
            << " of " << shift.num_seeds << " seeds\n";
  finish_stage(cfg, out_dir, "shift-study", stage_seed, timer.seconds(),
               {artifact::kShiftStudy, artifact::kShiftErrorCurves,
                artifact::kShiftQuantiles, artifact::kShiftErrorCurvesSvg});
}

}  // namespace

void ensure_out_dir(const std::string& out_dir) {
  if (out_dir.empty()) throw ConfigError("output directory must not be empty");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw IoError("cannot create output directory '" + out_dir +
                  "': " + ec.message());
  if (!fs::is_directory(out_dir))
    throw IoError("output path '" + out_dir + "' is not a directory");
}

void run_gen_data(const ExperimentConfig& cfg, const std::string& out_dir) {
  ensure_out_dir(out_dir);
  stage_gen_data(cfg, out_dir);
}

void run_train(const ExperimentConfig& cfg, const std::string& out_dir,
               const std::string& stage) {
  ensure_out_dir(out_dir);
  if (stage == "evaluator") {
    stage_train_evaluator(cfg, out_dir);
  } else if (stage == "baselines") {
    stage_train_baselines(cfg, out_dir);
  } else if (stage == "eg_rerank") {
    stage_train_eg(cfg, out_dir);
  } else if (stage == "eg_rerank_plus") {
    stage_train_eg_plus(cfg, out_dir);
  } else if (stage == "all") {
    stage_train_evaluator(cfg, out_dir);
    stage_train_baselines(cfg, out_dir);
    stage_train_eg(cfg, out_dir);
    stage_train_eg_plus(cfg, out_dir);
  } else {
    throw ConfigError(
        "unknown train stage '" + stage +
        "' (expected evaluator, baselines, eg_rerank, eg_rerank_plus, all)");
  }
}

void run_evaluate(const ExperimentConfig& cfg, const std::string& out_dir) {
  ensure_out_dir(out_dir);
  stage_evaluate(cfg, out_dir);
}

void run_shift_study(const ExperimentConfig& cfg, const std::string& out_dir) {
  ensure_out_dir(out_dir);
  stage_shift_study(cfg, out_dir);
}

bool run_verify(const std::string& out_dir, std::ostream& log) {
  const RunManifest manifest = RunManifest::load(out_dir);
  return manifest.verify(out_dir, log);
}

}  // namespace ranklab
