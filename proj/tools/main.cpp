// ranklab CLI: drives the experiment pipeline.
//
//   ranklab gen-data    --config cfg.json --out runs/a --seed 1 --threads 4
//   ranklab train       --stage evaluator|baselines|eg_rerank|eg_rerank_plus|all ...
//   ranklab evaluate    ...
//   ranklab shift-study ...
//   ranklab verify      --out runs/a
//
// Exit code 0 on success; on failure one machine-parsable line on stderr:
//   error: <kind>: <message>

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ranklab/core/error.hpp"
#include "ranklab/core/parallel.hpp"
#include "ranklab/harness/config.hpp"
#include "ranklab/harness/manifest.hpp"
#include "ranklab/harness/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path,
                  "JSON config file (defaults apply when omitted)");
  sub->add_option("--out", args.out_dir, "output directory")
      ->capture_default_str();
  sub->add_option("--seed", args.seed, "override the config's global seed")
      ->each([&args](const std::string&) { args.seed_given = true; });
  sub->add_option("--threads", args.threads,
                  "worker thread cap (0 = hardware, 1 = serial reference)")
      ->capture_default_str();
}

int run_command(const std::string& command, const CommonArgs& args,
                const std::string& stage) {
  ranklab::set_max_threads(args.threads);
  if (command == "verify") {
    if (!ranklab::run_verify(args.out_dir, std::cout)) {
      std::cerr << "error: verify: checksum mismatches in '" << args.out_dir
                << "'\n";
      return 1;
    }
    std::cout << "manifest verified: all checksums match\n";
    return 0;
  }

  ranklab::ExperimentConfig cfg = ranklab::load_config(args.config_path);
  if (args.seed_given) cfg.seed = args.seed;
  std::cout << "effective config:\n" << ranklab::effective_config_json(cfg);
  const double estimate = ranklab::estimated_evaluator_calls(cfg);
  if (estimate > cfg.budget.max_evaluator_calls)
    std::cerr << "warning: estimated evaluator calls "
              << static_cast<long long>(estimate)
              << " exceed the configured budget "
              << static_cast<long long>(cfg.budget.max_evaluator_calls)
              << "; this run may not be desk-scale\n";

  if (command == "gen-data")
    ranklab::run_gen_data(cfg, args.out_dir);
  else if (command == "train")
    ranklab::run_train(cfg, args.out_dir, stage);
  else if (command == "evaluate")
    ranklab::run_evaluate(cfg, args.out_dir);
  else if (command == "shift-study")
    ranklab::run_shift_study(cfg, args.out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ranklab: a desk-scale learning-to-rank laboratory"};
  app.set_version_flag("--version", std::string(ranklab::kToolVersion));
  app.require_subcommand(1);

  CommonArgs args;
  std::string stage = "all";

  CLI::App* gen = app.add_subcommand(
      "gen-data", "build the universe, rule, and labeled train/test lists");
  add_common(gen, args);
  CLI::App* train =
      app.add_subcommand("train", "train one pipeline stage (or all)");
  add_common(train, args);
  train
      ->add_option("--stage", stage,
                   "evaluator | baselines | eg_rerank | eg_rerank_plus | all")
      ->capture_default_str();
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "method report, consistency matrix, enumerate-k curve");
  add_common(evaluate, args);
  CLI::App* shift = app.add_subcommand(
      "shift-study", "evaluator generalization gap under biased logging");
  add_common(shift, args);
  CLI::App* verify =
      app.add_subcommand("verify", "recompute the manifest's checksums");
  add_common(verify, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (dynamic_cast<const CLI::Success*>(&e) != nullptr) return app.exit(e);
    std::cerr << "error: cli: " << e.what() << "\n";
    return 1;
  }

  const std::string command = gen->parsed()        ? "gen-data"
                              : train->parsed()    ? "train"
                              : evaluate->parsed() ? "evaluate"
                              : shift->parsed()    ? "shift-study"
                              : verify->parsed()   ? "verify"
                                                   : "";
  try {
    return run_command(command, args, stage);
  } catch (const ranklab::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
}
