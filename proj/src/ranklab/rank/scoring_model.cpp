#include "ranklab/rank/scoring_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ranklab/core/adam.hpp"
#include "ranklab/core/checkpoint.hpp"
#include "ranklab/core/error.hpp"
#include "ranklab/core/ops.hpp"
#include "ranklab/core/parallel.hpp"
#include "ranklab/core/rng.hpp"

namespace ranklab {

namespace {

constexpr const char* kNet = "net";

double softplus(double x) {
  // log(1 + e^x) without overflow.
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

std::string to_string(ScoringLoss loss) {
  switch (loss) {
    case ScoringLoss::mse: return "mse";
    case ScoringLoss::cross_entropy: return "cross_entropy";
    case ScoringLoss::hinge: return "hinge";
    case ScoringLoss::pairwise_logistic: return "pairwise_logistic";
    case ScoringLoss::pairwise_hinge: return "pairwise_hinge";
    case ScoringLoss::listnet: return "listnet";
  }
  throw ConfigError("unknown scoring loss");
}

ScoringLoss scoring_loss_from_string(const std::string& s) {
  if (s == "mse") return ScoringLoss::mse;
  if (s == "cross_entropy") return ScoringLoss::cross_entropy;
  if (s == "hinge") return ScoringLoss::hinge;
  if (s == "pairwise_logistic") return ScoringLoss::pairwise_logistic;
  if (s == "pairwise_hinge") return ScoringLoss::pairwise_hinge;
  if (s == "listnet") return ScoringLoss::listnet;
  throw ConfigError("unknown scoring loss '" + s + "'");
}

ScoringModel::ScoringModel(ScoringModelConfig cfg, uint64_t seed)
    : cfg_(std::move(cfg)) {
  if (cfg_.feature_dim <= 0 || cfg_.bg_dim < 0)
    throw ConfigError("scoring model needs a positive feature_dim");
  if (cfg_.widths.empty())
    throw ConfigError("scoring model widths must be non-empty");
  std::vector<int> w{cfg_.feature_dim + cfg_.bg_dim};
  w.insert(w.end(), cfg_.widths.begin(), cfg_.widths.end());
  w.push_back(1);
  spec_ = MlpSpec(w, Act::relu, Act::none);
  params_ = ParameterSet(seed);
  Rng rng(mix_seed(seed, "scoring-" + to_string(cfg_.loss)));
  mlp_init(params_, kNet, spec_, rng);
}

double ScoringModel::score_item(const ItemUniverse& universe, int item_id,
                                std::span<const double> bg) const {
  if (static_cast<int>(bg.size()) != cfg_.bg_dim)
    throw ConfigError("bg width " + std::to_string(bg.size()) + ", expected " +
                      std::to_string(cfg_.bg_dim));
  std::vector<double> in(static_cast<size_t>(cfg_.feature_dim + cfg_.bg_dim));
  auto x = universe.item(item_id);
  std::copy(x.begin(), x.end(), in.begin());
  std::copy(bg.begin(), bg.end(), in.begin() + x.size());
  return mlp_forward(params_, kNet, spec_, in)[0];
}

std::vector<double> ScoringModel::score(const ItemUniverse& universe,
                                        const Slate& slate) const {
  validate_slate(slate, universe);
  std::vector<double> out(static_cast<size_t>(slate.size()));
  for (int i = 0; i < slate.size(); ++i)
    out[static_cast<size_t>(i)] =
        score_item(universe, slate.item_ids[static_cast<size_t>(i)], slate.bg);
  return out;
}

// ---------------------------------------------------------------------------
// Training

// Per-slot workspace: scores one list and accumulates its gradient
// contribution plus the number of loss units it contributed.
struct ScoringModel::ListJob {
  std::vector<MlpCache> caches;
  std::vector<double> z, dz;
  std::vector<double> in, din;
  GradBuffer grads;
  double loss = 0.0;
  int64_t units = 0;

  void run(const ScoringModel& model, const MlpRef& ref,
           const ItemUniverse& universe, const Slate& slate, bool backward) {
    const int n = slate.size();
    const auto& cfg = model.cfg_;
    caches.resize(static_cast<size_t>(n));
    z.resize(static_cast<size_t>(n));
    dz.assign(static_cast<size_t>(n), 0.0);
    in.resize(static_cast<size_t>(cfg.feature_dim + cfg.bg_dim));
    loss = 0.0;
    units = 0;

    for (int i = 0; i < n; ++i) {
      auto x = universe.item(slate.item_ids[static_cast<size_t>(i)]);
      std::copy(x.begin(), x.end(), in.begin());
      std::copy(slate.bg.begin(), slate.bg.end(), in.begin() + x.size());
      mlp_forward(model.params_, ref, in,
                  std::span<double>(&z[static_cast<size_t>(i)], 1),
                  caches[static_cast<size_t>(i)]);
    }

    switch (cfg.loss) {
      case ScoringLoss::mse:
        for (int i = 0; i < n; ++i) {
          const double y = slate.purchase_labels[static_cast<size_t>(i)];
          const double diff = z[static_cast<size_t>(i)] - y;
          loss += diff * diff;
          dz[static_cast<size_t>(i)] = 2.0 * diff;
        }
        units = n;
        break;
      case ScoringLoss::cross_entropy:
        for (int i = 0; i < n; ++i) {
          const double y = slate.purchase_labels[static_cast<size_t>(i)];
          const double p = sigmoid(z[static_cast<size_t>(i)]);
          loss += binary_cross_entropy(p, y);
          dz[static_cast<size_t>(i)] = p - y;
        }
        units = n;
        break;
      case ScoringLoss::hinge:
        for (int i = 0; i < n; ++i) {
          const double s = slate.purchase_labels[static_cast<size_t>(i)] ? 1.0 : -1.0;
          const double margin = 1.0 - s * z[static_cast<size_t>(i)];
          if (margin > 0.0) {
            loss += margin;
            dz[static_cast<size_t>(i)] = -s;
          }
        }
        units = n;
        break;
      case ScoringLoss::pairwise_logistic:
      case ScoringLoss::pairwise_hinge:
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            if (slate.purchase_labels[static_cast<size_t>(i)] <=
                slate.purchase_labels[static_cast<size_t>(j)])
              continue;  // want y_i > y_j: i is the winner
            const double diff = z[static_cast<size_t>(i)] - z[static_cast<size_t>(j)];
            ++units;
            if (cfg.loss == ScoringLoss::pairwise_logistic) {
              loss += softplus(-diff);
              const double g = sigmoid(diff) - 1.0;  // d softplus(-diff) / d diff
              dz[static_cast<size_t>(i)] += g;
              dz[static_cast<size_t>(j)] -= g;
            } else if (diff < 1.0) {
              loss += 1.0 - diff;
              dz[static_cast<size_t>(i)] -= 1.0;
              dz[static_cast<size_t>(j)] += 1.0;
            }
          }
        }
        break;
      case ScoringLoss::listnet: {
        double label_sum = 0.0;
        for (int y : slate.purchase_labels) label_sum += y;
        if (label_sum == 0.0) break;  // target distribution undefined
        units = 1;
        const double lse = log_sum_exp(z);
        for (int i = 0; i < n; ++i) {
          const double t = slate.purchase_labels[static_cast<size_t>(i)] / label_sum;
          const double logp = z[static_cast<size_t>(i)] - lse;
          loss -= t * logp;
          dz[static_cast<size_t>(i)] = std::exp(logp) - t;
        }
        break;
      }
    }

    if (!backward || units == 0) return;
    if (grads.empty()) grads.reset(model.params_);
    for (int i = 0; i < n; ++i) {
      if (dz[static_cast<size_t>(i)] == 0.0) continue;
      mlp_backward(model.params_, ref, caches[static_cast<size_t>(i)],
                   std::span<const double>(&dz[static_cast<size_t>(i)], 1), {},
                   grads);
    }
  }
};

ScoringTrainResult ScoringModel::train(const Dataset& train_data,
                                       const Dataset& val_data,
                                       const ItemUniverse& universe,
                                       uint64_t seed) {
  if (train_data.slates.empty() || val_data.slates.empty())
    throw DataError("scoring model training needs non-empty train and validation sets");
  for (const Slate& s : train_data.slates)
    if (!s.labeled())
      throw DataError("scoring model training needs purchase labels");

  MlpRef ref = mlp_ref(params_, kNet, spec_);
  const int batch = std::max(1, cfg_.batch_lists);
  std::vector<ListJob> slots(static_cast<size_t>(batch));
  Adam adam(params_, AdamConfig{cfg_.learning_rate, 0.9, 0.999, 1e-8});

  std::vector<int> order(train_data.slates.size());
  std::iota(order.begin(), order.end(), 0);

  auto epoch_loss = [&](const std::vector<Slate>& slates) {
    double total = 0.0;
    int64_t units = 0;
    for (size_t start = 0; start < slates.size(); start += static_cast<size_t>(batch)) {
      const int count = static_cast<int>(
          std::min(static_cast<size_t>(batch), slates.size() - start));
      parallel_for(count, [&](int64_t b) {
        slots[static_cast<size_t>(b)].run(*this, ref, universe,
                                          slates[start + static_cast<size_t>(b)],
                                          false);
      });
      for (int b = 0; b < count; ++b) {
        total += slots[static_cast<size_t>(b)].loss;
        units += slots[static_cast<size_t>(b)].units;
      }
    }
    return units > 0 ? total / static_cast<double>(units) : 0.0;
  };

  ScoringTrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<double> best_values(params_.flat_values().begin(),
                                  params_.flat_values().end());
  int stale = 0;

  for (int epoch = 0; epoch < cfg_.max_epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(mix_seed(seed, "scoring-shuffle"), static_cast<uint64_t>(epoch)));
    shuffle(order, shuffle_rng);

    double train_total = 0.0;
    int64_t train_units = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch)) {
      const int count = static_cast<int>(
          std::min(static_cast<size_t>(batch), order.size() - start));
      parallel_for(count, [&](int64_t b) {
        ListJob& job = slots[static_cast<size_t>(b)];
        if (!job.grads.empty()) job.grads.clear();
        job.run(*this, ref, universe,
                train_data.slates[static_cast<size_t>(
                    order[start + static_cast<size_t>(b)])],
                true);
      });
      int64_t batch_units = 0;
      for (int b = 0; b < count; ++b) batch_units += slots[static_cast<size_t>(b)].units;
      if (batch_units == 0) continue;  // e.g. all-negative pairwise minibatch
      params_.zero_grads();
      for (int b = 0; b < count; ++b) {
        const ListJob& job = slots[static_cast<size_t>(b)];
        if (job.units == 0) continue;  // never produced gradients this round
        train_total += job.loss;
        job.grads.add_to(params_, 1.0 / static_cast<double>(batch_units));
      }
      train_units += batch_units;
      adam.update(params_);
    }

    ScoringEpochRow row;
    row.epoch = epoch;
    row.train_loss = train_units > 0 ? train_total / static_cast<double>(train_units) : 0.0;
    row.val_loss = epoch_loss(val_data.slates);
    result.epochs.push_back(row);
    if (!std::isfinite(row.val_loss))
      throw DivergenceError("scoring model validation loss is not finite");

    if (row.val_loss < best_val) {
      best_val = row.val_loss;
      best_values.assign(params_.flat_values().begin(), params_.flat_values().end());
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale > cfg_.patience) {
      break;
    }
  }

  std::copy(best_values.begin(), best_values.end(),
            params_.mutable_flat_values().begin());
  params_.zero_grads();
  return result;
}

// ---------------------------------------------------------------------------
// Persistence

void ScoringModel::save(const std::string& path) const {
  const std::string arch = "scoring loss " + to_string(cfg_.loss) +
                           " feature_dim " + std::to_string(cfg_.feature_dim) +
                           " bg_dim " + std::to_string(cfg_.bg_dim) + " widths " +
                           join_widths(cfg_.widths);
  write_checkpoint(path, checkpoint_of(params_, arch));
}

ScoringModel ScoringModel::load(const std::string& path) {
  CheckpointDoc doc = read_checkpoint(path);
  std::istringstream is(doc.arch);
  std::string tag, key, s;
  ScoringModelConfig cfg;
  is >> tag;
  if (tag != "scoring")
    throw IoError("checkpoint '" + path + "' is not a scoring model (arch '" +
                  doc.arch + "')");
  while (is >> key) {
    if (key == "loss") { is >> s; cfg.loss = scoring_loss_from_string(s); }
    else if (key == "feature_dim") is >> cfg.feature_dim;
    else if (key == "bg_dim") is >> cfg.bg_dim;
    else if (key == "widths") { is >> s; cfg.widths = parse_widths(s); }
    else throw IoError("unknown scoring model arch key '" + key + "'");
  }
  ScoringModel model(cfg, doc.seed);
  load_into(model.params_, doc);
  return model;
}

}  // namespace ranklab
