#pragma once

// The experiment pipeline: gen-data → train (evaluator → baselines →
// eg_rerank / eg_rerank_plus) → evaluate / shift-study, all rooted in one
// output directory.  Each stage loads its prerequisites from that directory,
// derives its RNG stream from (config seed, stage name), writes its
// artifacts, and updates manifest.json; re-running a stage with the same
// config and seed reproduces its files byte for byte (single-threaded, and
// for everything here also under any thread count).

#include <ostream>
#include <string>

#include "ranklab/harness/config.hpp"

namespace ranklab {

// Artifact names inside the output directory.
namespace artifact {
inline constexpr const char* kEffectiveConfig = "effective_config.json";
inline constexpr const char* kUniverse = "universe.ckpt";
inline constexpr const char* kRule = "rule.ckpt";
inline constexpr const char* kTrainLists = "train_lists.txt";
inline constexpr const char* kTestLists = "test_lists.txt";
inline constexpr const char* kPositionProfile = "position_profile.csv";
inline constexpr const char* kEvaluator = "evaluator.ckpt";
inline constexpr const char* kEvaluatorTrace = "evaluator_trace.csv";
inline constexpr const char* kEvaluatorRequirements =
    "evaluator_requirements.csv";
inline constexpr const char* kScoringTraces = "scoring_traces.csv";
inline constexpr const char* kEgGenerator = "eg_generator.ckpt";
inline constexpr const char* kEgTrace = "eg_trace.csv";
inline constexpr const char* kEgpGenerator = "egp_generator.ckpt";
inline constexpr const char* kEgpDiscriminator = "egp_discriminator.ckpt";
inline constexpr const char* kEgpTrace = "egp_trace.csv";
inline constexpr const char* kReport = "report.csv";
inline constexpr const char* kConsistencyMatrix = "consistency_matrix.csv";
inline constexpr const char* kEnumerateCurve = "enumerate_curve.csv";
inline constexpr const char* kEnumerateCrossing = "enumerate_crossing.csv";
inline constexpr const char* kEnumerateCurveSvg = "enumerate_curve.svg";
inline constexpr const char* kShiftStudy = "shift_study.csv";
inline constexpr const char* kShiftErrorCurves = "shift_error_curves.csv";
inline constexpr const char* kShiftQuantiles = "shift_quantiles.csv";
inline constexpr const char* kShiftErrorCurvesSvg = "shift_error_curves.svg";

// scoring_<loss>.ckpt
std::string scoring_checkpoint(ScoringLoss loss);
}  // namespace artifact

// Creates the output directory (and parents); throws IoError when that
// fails.  Every run_* entry point calls it first.
void ensure_out_dir(const std::string& out_dir);

void run_gen_data(const ExperimentConfig& cfg, const std::string& out_dir);

// stage ∈ {evaluator, baselines, eg_rerank, eg_rerank_plus, all}; `all` runs
// the four in dependency order.  Missing prerequisites raise PipelineError
// naming the stage to run first.
void run_train(const ExperimentConfig& cfg, const std::string& out_dir,
               const std::string& stage);

void run_evaluate(const ExperimentConfig& cfg, const std::string& out_dir);

void run_shift_study(const ExperimentConfig& cfg, const std::string& out_dir);

// Recomputes every checksum recorded in manifest.json; logs one line per
// file.  True when the inventory is clean.
bool run_verify(const std::string& out_dir, std::ostream& log);

}  // namespace ranklab
