#include "ranklab/harness/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "ranklab/core/error.hpp"

namespace ranklab {

namespace {

using nlohmann::json;

// Rejects unknown keys so typos fail loudly instead of silently taking
// defaults.
void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) == allowed.end()) {
      const std::string path = section.empty() ? key : section + "." + key;
      throw ConfigError("unknown config key '" + path + "'");
    }
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& section) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    const std::string path = section.empty() ? key : section + "." + key;
    throw ConfigError("config field '" + path + "' has the wrong type");
  }
}

void read_widths(const json& obj, const char* key, std::vector<int>& out,
                 const std::string& section) {
  read(obj, key, out, section);
  if (out.empty())
    throw ConfigError("config field '" + section + "." + key +
                      "' must not be empty");
  for (int w : out)
    if (w <= 0)
      throw ConfigError("config field '" + section + "." + key +
                        "' must hold positive widths");
}

}  // namespace

std::vector<std::string> known_methods(const ExperimentConfig& cfg) {
  std::vector<std::string> out{"identity", "reverse", "random"};
  for (ScoringLoss loss : cfg.scoring.losses) out.push_back(to_string(loss));
  out.push_back("direct_e");
  out.push_back("greedy_e");
  out.push_back("enumerate_" + std::to_string(cfg.report.enumerate_k));
  out.push_back("eg_rerank");
  out.push_back("eg_rerank_plus");
  return out;
}

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig cfg;
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw ConfigError("config file '" + path + "' is not valid JSON: " +
                        e.what());
    }
    if (!doc.is_object())
      throw ConfigError("config file '" + path + "' must hold a JSON object");
  }

  check_keys(doc, "",
             {"seed", "scenario", "data", "evaluator", "scoring", "generator",
              "discriminator", "eg", "report", "shift", "budget"});

  read(doc, "seed", cfg.seed, "");

  if (doc.contains("scenario")) {
    const json& s = doc.at("scenario");
    check_keys(s, "scenario",
               {"num_items", "feature_dim", "list_length", "bg_dim",
                "influence_mode", "alpha_start", "alpha_end",
                "target_mean_rate", "logit_std"});
    read(s, "num_items", cfg.scenario.num_items, "scenario");
    read(s, "feature_dim", cfg.scenario.feature_dim, "scenario");
    read(s, "list_length", cfg.scenario.list_length, "scenario");
    read(s, "bg_dim", cfg.scenario.bg_dim, "scenario");
    if (s.contains("influence_mode")) {
      std::string mode;
      read(s, "influence_mode", mode, "scenario");
      cfg.scenario.influence_mode = influence_mode_from_string(mode);
    }
    read(s, "alpha_start", cfg.scenario.alpha_start, "scenario");
    read(s, "alpha_end", cfg.scenario.alpha_end, "scenario");
    read(s, "target_mean_rate", cfg.scenario.target_mean_rate, "scenario");
    read(s, "logit_std", cfg.scenario.logit_std, "scenario");
  }
  if (cfg.scenario.num_items <= 0 || cfg.scenario.feature_dim <= 0 ||
      cfg.scenario.list_length <= 0 || cfg.scenario.bg_dim < 0)
    throw ConfigError("scenario sizes must be positive");
  if (cfg.scenario.list_length > cfg.scenario.num_items)
    throw ConfigError("scenario.list_length exceeds scenario.num_items");

  if (doc.contains("data")) {
    const json& s = doc.at("data");
    check_keys(s, "data", {"num_lists", "train_fraction"});
    read(s, "num_lists", cfg.data.num_lists, "data");
    read(s, "train_fraction", cfg.data.train_fraction, "data");
  }
  if (cfg.data.num_lists < 0)
    throw ConfigError("data.num_lists must be non-negative");
  if (cfg.data.train_fraction < 0.0 || cfg.data.train_fraction > 1.0)
    throw ConfigError("data.train_fraction must lie in [0, 1]");

  if (doc.contains("evaluator")) {
    const json& s = doc.at("evaluator");
    check_keys(s, "evaluator",
               {"enc_widths", "hidden", "head_widths", "click_weight",
                "learning_rate", "batch_lists", "max_epochs", "patience"});
    read_widths(s, "enc_widths", cfg.evaluator.enc_widths, "evaluator");
    read(s, "hidden", cfg.evaluator.hidden, "evaluator");
    read_widths(s, "head_widths", cfg.evaluator.head_widths, "evaluator");
    if (s.contains("click_weight")) {
      const json& cw = s.at("click_weight");
      if (cw.is_string() && cw.get<std::string>() == "auto") {
        cfg.evaluator.auto_click_weight = true;
      } else if (cw.is_number()) {
        cfg.evaluator.auto_click_weight = false;
        cfg.evaluator.click_weight = cw.get<double>();
      } else {
        throw ConfigError(
            "evaluator.click_weight must be a number or \"auto\"");
      }
    }
    read(s, "learning_rate", cfg.evaluator.learning_rate, "evaluator");
    read(s, "batch_lists", cfg.evaluator.batch_lists, "evaluator");
    read(s, "max_epochs", cfg.evaluator.max_epochs, "evaluator");
    read(s, "patience", cfg.evaluator.patience, "evaluator");
  }

  if (doc.contains("scoring")) {
    const json& s = doc.at("scoring");
    check_keys(s, "scoring",
               {"widths", "losses", "learning_rate", "batch_lists",
                "max_epochs", "patience"});
    read_widths(s, "widths", cfg.scoring.widths, "scoring");
    if (s.contains("losses")) {
      std::vector<std::string> names;
      read(s, "losses", names, "scoring");
      cfg.scoring.losses.clear();
      for (const std::string& n : names)
        cfg.scoring.losses.push_back(scoring_loss_from_string(n));
      if (cfg.scoring.losses.empty())
        throw ConfigError("scoring.losses must not be empty");
    }
    read(s, "learning_rate", cfg.scoring.learning_rate, "scoring");
    read(s, "batch_lists", cfg.scoring.batch_lists, "scoring");
    read(s, "max_epochs", cfg.scoring.max_epochs, "scoring");
    read(s, "patience", cfg.scoring.patience, "scoring");
  }

  if (doc.contains("generator")) {
    const json& s = doc.at("generator");
    check_keys(s, "generator",
               {"senc_widths", "aenc_widths", "hidden", "head_widths",
                "learning_rate"});
    read_widths(s, "senc_widths", cfg.generator.senc_widths, "generator");
    read_widths(s, "aenc_widths", cfg.generator.aenc_widths, "generator");
    read(s, "hidden", cfg.generator.hidden, "generator");
    read_widths(s, "head_widths", cfg.generator.head_widths, "generator");
    read(s, "learning_rate", cfg.generator.learning_rate, "generator");
  }

  if (doc.contains("discriminator")) {
    const json& s = doc.at("discriminator");
    check_keys(s, "discriminator", {"enc_widths", "hidden", "head_widths"});
    read_widths(s, "enc_widths", cfg.discriminator.enc_widths, "discriminator");
    read(s, "hidden", cfg.discriminator.hidden, "discriminator");
    read_widths(s, "head_widths", cfg.discriminator.head_widths, "discriminator");
  }

  if (doc.contains("eg")) {
    const json& s = doc.at("eg");
    check_keys(s, "eg",
               {"iterations", "batch_episodes", "minibatch_episodes",
                "epochs_per_batch", "k_rollouts", "clip", "sigma_floor",
                "beta", "disc_minibatch_lists", "disc_learning_rate"});
    read(s, "iterations", cfg.eg.iterations, "eg");
    read(s, "batch_episodes", cfg.eg.batch_episodes, "eg");
    read(s, "minibatch_episodes", cfg.eg.minibatch_episodes, "eg");
    read(s, "epochs_per_batch", cfg.eg.epochs_per_batch, "eg");
    read(s, "k_rollouts", cfg.eg.k_rollouts, "eg");
    read(s, "clip", cfg.eg.clip, "eg");
    read(s, "sigma_floor", cfg.eg.sigma_floor, "eg");
    read(s, "beta", cfg.eg.beta, "eg");
    read(s, "disc_minibatch_lists", cfg.eg.disc_minibatch_lists, "eg");
    read(s, "disc_learning_rate", cfg.eg.disc_learning_rate, "eg");
  }

  if (doc.contains("report")) {
    const json& s = doc.at("report");
    check_keys(s, "report",
               {"methods", "eval_lists", "repeat_seeds", "enumerate_k",
                "curve_ks", "curve_sets"});
    read(s, "methods", cfg.report.methods, "report");
    read(s, "eval_lists", cfg.report.eval_lists, "report");
    read(s, "repeat_seeds", cfg.report.repeat_seeds, "report");
    read(s, "enumerate_k", cfg.report.enumerate_k, "report");
    read(s, "curve_ks", cfg.report.curve_ks, "report");
    read(s, "curve_sets", cfg.report.curve_sets, "report");
  }
  if (cfg.report.repeat_seeds <= 0)
    throw ConfigError("report.repeat_seeds must be positive");
  if (cfg.report.enumerate_k <= 0)
    throw ConfigError("report.enumerate_k must be positive");
  if (cfg.report.curve_ks.empty())
    throw ConfigError("report.curve_ks must not be empty");
  for (int k : cfg.report.curve_ks)
    if (k <= 0) throw ConfigError("report.curve_ks must hold positive ks");
  if (cfg.report.curve_sets <= 0)
    throw ConfigError("report.curve_sets must be positive");
  if (cfg.report.eval_lists < 0)
    throw ConfigError("report.eval_lists must be non-negative");

  if (doc.contains("shift")) {
    const json& s = doc.at("shift");
    check_keys(s, "shift",
               {"num_seeds", "num_lists", "bias_strength", "noise_scale",
                "max_epochs"});
    read(s, "num_seeds", cfg.shift.num_seeds, "shift");
    read(s, "num_lists", cfg.shift.num_lists, "shift");
    read(s, "bias_strength", cfg.shift.bias_strength, "shift");
    read(s, "noise_scale", cfg.shift.noise_scale, "shift");
    read(s, "max_epochs", cfg.shift.max_epochs, "shift");
  }
  if (cfg.shift.num_seeds <= 0 || cfg.shift.num_lists <= 0)
    throw ConfigError("shift.num_seeds and shift.num_lists must be positive");

  if (doc.contains("budget")) {
    const json& s = doc.at("budget");
    check_keys(s, "budget", {"max_evaluator_calls"});
    read(s, "max_evaluator_calls", cfg.budget.max_evaluator_calls, "budget");
  }

  // Wire scenario dimensions into the model configs.
  cfg.evaluator.feature_dim = cfg.scenario.feature_dim;
  cfg.evaluator.bg_dim = cfg.scenario.bg_dim;
  cfg.generator.feature_dim = cfg.scenario.feature_dim;
  cfg.generator.bg_dim = cfg.scenario.bg_dim;
  cfg.discriminator.feature_dim = cfg.scenario.feature_dim;
  cfg.discriminator.bg_dim = cfg.scenario.bg_dim;
  cfg.eg.list_length = cfg.scenario.list_length;

  if (cfg.report.methods.empty()) cfg.report.methods = known_methods(cfg);
  const std::vector<std::string> known = known_methods(cfg);
  std::set<std::string> seen;
  for (const std::string& m : cfg.report.methods) {
    if (std::find(known.begin(), known.end(), m) == known.end())
      throw ConfigError("unknown method '" + m + "' in report.methods");
    if (!seen.insert(m).second)
      throw ConfigError("method '" + m + "' listed twice in report.methods");
  }
  return cfg;
}

std::string effective_config_json(const ExperimentConfig& cfg) {
  json doc;
  doc["seed"] = cfg.seed;
  doc["scenario"] = {
      {"num_items", cfg.scenario.num_items},
      {"feature_dim", cfg.scenario.feature_dim},
      {"list_length", cfg.scenario.list_length},
      {"bg_dim", cfg.scenario.bg_dim},
      {"influence_mode", influence_mode_to_string(cfg.scenario.influence_mode)},
      {"alpha_start", cfg.scenario.alpha_start},
      {"alpha_end", cfg.scenario.alpha_end},
      {"target_mean_rate", cfg.scenario.target_mean_rate},
      {"logit_std", cfg.scenario.logit_std},
  };
  doc["data"] = {{"num_lists", cfg.data.num_lists},
                 {"train_fraction", cfg.data.train_fraction}};
  doc["evaluator"] = {
      {"enc_widths", cfg.evaluator.enc_widths},
      {"hidden", cfg.evaluator.hidden},
      {"head_widths", cfg.evaluator.head_widths},
      {"learning_rate", cfg.evaluator.learning_rate},
      {"batch_lists", cfg.evaluator.batch_lists},
      {"max_epochs", cfg.evaluator.max_epochs},
      {"patience", cfg.evaluator.patience},
  };
  if (cfg.evaluator.auto_click_weight)
    doc["evaluator"]["click_weight"] = "auto";
  else
    doc["evaluator"]["click_weight"] = cfg.evaluator.click_weight;
  {
    std::vector<std::string> losses;
    for (ScoringLoss loss : cfg.scoring.losses) losses.push_back(to_string(loss));
    doc["scoring"] = {
        {"widths", cfg.scoring.widths},
        {"losses", losses},
        {"learning_rate", cfg.scoring.learning_rate},
        {"batch_lists", cfg.scoring.batch_lists},
        {"max_epochs", cfg.scoring.max_epochs},
        {"patience", cfg.scoring.patience},
    };
  }
  doc["generator"] = {
      {"senc_widths", cfg.generator.senc_widths},
      {"aenc_widths", cfg.generator.aenc_widths},
      {"hidden", cfg.generator.hidden},
      {"head_widths", cfg.generator.head_widths},
      {"learning_rate", cfg.generator.learning_rate},
  };
  doc["discriminator"] = {
      {"enc_widths", cfg.discriminator.enc_widths},
      {"hidden", cfg.discriminator.hidden},
      {"head_widths", cfg.discriminator.head_widths},
  };
  doc["eg"] = {
      {"iterations", cfg.eg.iterations},
      {"batch_episodes", cfg.eg.batch_episodes},
      {"minibatch_episodes", cfg.eg.minibatch_episodes},
      {"epochs_per_batch", cfg.eg.epochs_per_batch},
      {"k_rollouts", cfg.eg.k_rollouts},
      {"clip", cfg.eg.clip},
      {"sigma_floor", cfg.eg.sigma_floor},
      {"beta", cfg.eg.beta},
      {"disc_minibatch_lists", cfg.eg.disc_minibatch_lists},
      {"disc_learning_rate", cfg.eg.disc_learning_rate},
  };
  doc["report"] = {
      {"methods", cfg.report.methods},
      {"eval_lists", cfg.report.eval_lists},
      {"repeat_seeds", cfg.report.repeat_seeds},
      {"enumerate_k", cfg.report.enumerate_k},
      {"curve_ks", cfg.report.curve_ks},
      {"curve_sets", cfg.report.curve_sets},
  };
  doc["shift"] = {
      {"num_seeds", cfg.shift.num_seeds},
      {"num_lists", cfg.shift.num_lists},
      {"bias_strength", cfg.shift.bias_strength},
      {"noise_scale", cfg.shift.noise_scale},
      {"max_epochs", cfg.shift.max_epochs},
  };
  doc["budget"] = {{"max_evaluator_calls", cfg.budget.max_evaluator_calls}};
  return doc.dump(2) + "\n";
}

double estimated_evaluator_calls(const ExperimentConfig& cfg) {
  const double n = cfg.scenario.list_length;
  const double lists = cfg.data.num_lists;
  // item-level evaluator forwards: training epochs over the train split,
  // plus PPO episodes with k branch rollouts, plus report scoring.
  const double train_calls =
      lists * n * (cfg.evaluator.max_epochs + 1.0);
  const double branch_steps = 0.5 * n * (n + 1.0) * cfg.eg.k_rollouts;
  const double eg_calls = 2.0 * cfg.eg.iterations * cfg.eg.batch_episodes *
                          (n + branch_steps);
  const double report_lists =
      cfg.report.eval_lists > 0
          ? std::min<double>(cfg.report.eval_lists, lists)
          : lists;
  const double report_calls = static_cast<double>(cfg.report.methods.size()) *
                              cfg.report.repeat_seeds * report_lists * n *
                              (2.0 + cfg.report.enumerate_k);
  return train_calls + eg_calls + report_calls;
}

}  // namespace ranklab
