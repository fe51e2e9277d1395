#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ranklab/core/mlp.hpp"
#include "ranklab/core/params.hpp"
#include "ranklab/sim/slate.hpp"
#include "ranklab/sim/universe.hpp"

namespace ranklab {

class Rng;

// Direction of the mutual-influence term g: "dissimilar" rewards items
// unlike the running prefix mean (the default), "similar" rewards likeness.
enum class InfluenceMode { dissimilar, similar };

InfluenceMode influence_mode_from_string(const std::string& s);
const char* influence_mode_to_string(InfluenceMode m);

// The hidden ground-truth scoring rule.  Per position i (1-based),
//
//   f_i = alpha_i * r(x_i) + (1 - alpha_i) * g(x_1..x_i)
//
// where r is a frozen randomly-weighted network squashed by a sigmoid and g
// is a cosine term against the inclusive running mean of the list so far.
// Immutable after construction.
struct GroundTruthRule {
  ParameterSet net;             // base-rate network, prefix "net"
  MlpSpec net_spec;
  std::vector<double> alpha;    // alpha_i per position, length N
  InfluenceMode mode = InfluenceMode::dissimilar;
  // One-time affine recentering of the net's raw output pre-sigmoid:
  // r = sigmoid(scale * raw + shift).  The scale widens the (otherwise
  // nearly flat) random-net output to a configured spread; the shift is
  // bisected so the universe-mean r hits the target.
  double recenter_scale = 1.0;
  double recenter_shift = 0.0;
  uint64_t seed = 0;

  int positions() const { return static_cast<int>(alpha.size()); }
  int feature_dim() const { return net_spec.input_width(); }
};

struct RuleOptions {
  double alpha_start = 1.0;
  double alpha_end = 0.4;
  InfluenceMode mode = InfluenceMode::dissimilar;
  // Universe-mean base rate the construction-time recentering aims for.
  double target_mean_rate = 0.47;
  // Target standard deviation of the pre-sigmoid logits over the universe.
  // Random nets come out almost constant; rescaling gives the catalogue a
  // real spread of conversion rates.  <= 0 keeps the raw spread.
  double logit_std = 1.25;
};

// Builds the rule for a universe: random net (widths d-32-32-1, tanh hidden),
// linear alpha schedule over N positions, and a one-time affine recentering
// of the net output chosen by bisection so the universe-mean r hits
// target_mean_rate.
GroundTruthRule build_rule(const ItemUniverse& universe, int N, uint64_t seed,
                           const RuleOptions& opts = {});

// Base conversion rate r in (0,1) for one item feature vector.
double base_rate(const GroundTruthRule& rule, std::span<const double> feature);

// Mutual influence g in [0,1] for 1-based position i of the given features.
// Zero-norm vectors use the convention cosine := 1 (an empty prefix is
// "perfectly similar"), so dissimilar mode returns 0, never an error.
double mutual_influence(const GroundTruthRule& rule,
                        const std::vector<std::span<const double>>& features,
                        int i);

struct ScoredList {
  std::vector<double> f;  // per-position purchase probability
  double true_score = 0.0;  // sum of f
};

// Scores a full slate under Eq.-20-style dynamics; throws DataError for
// invalid slates and ConfigError if the slate length exceeds the alpha
// schedule.
ScoredList score_list(const GroundTruthRule& rule, const ItemUniverse& universe,
                      const Slate& slate);

// Bernoulli labels: purchase_i ~ B(f_i), click_i ~ B(sqrt(f_i)); draws occur
// position by position, purchase before click.
struct SampledLabels {
  std::vector<int> purchase;
  std::vector<int> click;
};
SampledLabels sample_labels(const GroundTruthRule& rule,
                            const ItemUniverse& universe, const Slate& slate,
                            Rng& rng);

// Same item order, fresh labels — the "online feedback" surrogate.
Slate relabel(const GroundTruthRule& rule, const ItemUniverse& universe,
              const Slate& slate, Rng& rng);

void save_rule(const std::string& path, const GroundTruthRule& rule);
GroundTruthRule load_rule(const std::string& path);

// Read-only scoring helper that caches every item's base rate once, for the
// paths that score many slates against one (rule, universe) pair.  Safe for
// concurrent use.  Skips slate validation; callers pass well-formed slates.
class RuleScorer {
 public:
  RuleScorer(const GroundTruthRule& rule, const ItemUniverse& universe);

  double rate(int item_id) const { return rates_[static_cast<size_t>(item_id)]; }
  ScoredList score(std::span<const int> item_ids) const;
  double true_score(std::span<const int> item_ids) const {
    return score(item_ids).true_score;
  }
  const GroundTruthRule& rule() const { return *rule_; }
  const ItemUniverse& universe() const { return *universe_; }

 private:
  const GroundTruthRule* rule_;
  const ItemUniverse* universe_;
  std::vector<double> rates_;
};

// Incremental g computation for hot loops: feed items in order, ask for g
// with the next feature included before pushing it.
class InfluenceTracker {
 public:
  explicit InfluenceTracker(int dim, InfluenceMode mode)
      : mode_(mode), sum_(static_cast<size_t>(dim), 0.0) {}

  void reset() {
    std::fill(sum_.begin(), sum_.end(), 0.0);
    count_ = 0;
  }
  // g at position count_+1 if `x` were appended now.
  double g_with(std::span<const double> x) const;
  void push(std::span<const double> x);
  int count() const { return count_; }

 private:
  InfluenceMode mode_;
  std::vector<double> sum_;
  int count_ = 0;
};

}  // namespace ranklab
