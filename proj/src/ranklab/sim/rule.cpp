#include "ranklab/sim/rule.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "ranklab/core/checkpoint.hpp"
#include "ranklab/core/error.hpp"
#include "ranklab/core/kernels.hpp"
#include "ranklab/core/ops.hpp"
#include "ranklab/core/rng.hpp"

namespace ranklab {

namespace {

constexpr const char* kNetPrefix = "net";

MlpSpec rule_net_spec(int d) {
  return MlpSpec({d, 32, 32, 1}, Act::tanh, Act::none);
}

double raw_rate(const GroundTruthRule& rule, std::span<const double> feature) {
  MlpRef ref = mlp_ref(rule.net, kNetPrefix, rule.net_spec);
  MlpCache cache;
  double out = 0.0;
  mlp_forward(rule.net, ref, feature, std::span<double>(&out, 1), cache);
  return out;
}

double cosine_or_one(std::span<const double> a, const double* b_sum, double b_scale,
                     int n) {
  // cosine(a, b_sum * b_scale); zero-norm convention: cosine := 1.
  double dot_ab = 0.0, na = 0.0, nb = 0.0;
  for (int i = 0; i < n; ++i) {
    double bv = b_sum[i] * b_scale;
    dot_ab += a[static_cast<size_t>(i)] * bv;
    na += a[static_cast<size_t>(i)] * a[static_cast<size_t>(i)];
    nb += bv * bv;
  }
  if (na <= 0.0 || nb <= 0.0) return 1.0;
  return dot_ab / (std::sqrt(na) * std::sqrt(nb));
}

double g_from_cosine(InfluenceMode mode, double c) {
  double v = (mode == InfluenceMode::dissimilar) ? 1.0 - c : c;
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace

InfluenceMode influence_mode_from_string(const std::string& s) {
  if (s == "dissimilar") return InfluenceMode::dissimilar;
  if (s == "similar") return InfluenceMode::similar;
  throw ConfigError("unknown influence mode '" + s + "'");
}

const char* influence_mode_to_string(InfluenceMode m) {
  return m == InfluenceMode::dissimilar ? "dissimilar" : "similar";
}

void validate_slate(const Slate& slate, const ItemUniverse& universe) {
  std::unordered_set<int> seen;
  for (int id : slate.item_ids) {
    if (id < 0 || id >= universe.num_items)
      throw DataError("slate references item " + std::to_string(id) +
                      " outside the universe of " +
                      std::to_string(universe.num_items));
    if (!seen.insert(id).second)
      throw DataError("slate repeats item " + std::to_string(id));
  }
  size_t n = slate.item_ids.size();
  if (!slate.purchase_labels.empty() && slate.purchase_labels.size() != n)
    throw DataError("purchase label count does not match slate length");
  if (!slate.click_labels.empty() && slate.click_labels.size() != n)
    throw DataError("click label count does not match slate length");
}

GroundTruthRule build_rule(const ItemUniverse& universe, int N, uint64_t seed,
                           const RuleOptions& opts) {
  if (N <= 0) throw ConfigError("rule needs a positive list length");
  if (opts.alpha_start < 0.0 || opts.alpha_start > 1.0 || opts.alpha_end < 0.0 ||
      opts.alpha_end > 1.0 || opts.alpha_end > opts.alpha_start)
    throw ConfigError("alpha schedule endpoints must satisfy 0 <= end <= start <= 1");

  GroundTruthRule rule;
  rule.seed = seed;
  rule.mode = opts.mode;
  rule.net_spec = rule_net_spec(universe.feature_dim);
  rule.net = ParameterSet(seed);
  Rng net_rng(mix_seed(seed, "rule-net"));
  mlp_init(rule.net, kNetPrefix, rule.net_spec, net_rng);

  rule.alpha.resize(static_cast<size_t>(N));
  for (int i = 0; i < N; ++i) {
    double t = (N == 1) ? 0.0 : static_cast<double>(i) / (N - 1);
    rule.alpha[static_cast<size_t>(i)] =
        opts.alpha_start + (opts.alpha_end - opts.alpha_start) * t;
  }

  // One-time affine recentering of the raw net output.  First the scale: a
  // randomly initialized net is nearly constant over the universe, so its
  // output is rescaled to the requested pre-sigmoid spread.  Then the shift:
  // sigmoid is monotone, so the universe-mean rate is monotone in the shift
  // and bisection converges.
  std::vector<double> raw(static_cast<size_t>(universe.num_items));
  for (int m = 0; m < universe.num_items; ++m)
    raw[static_cast<size_t>(m)] = raw_rate(rule, universe.item(m));
  rule.recenter_scale = 1.0;
  if (opts.logit_std > 0.0 && universe.num_items > 1) {
    double mean = 0.0;
    for (double z : raw) mean += z;
    mean /= static_cast<double>(raw.size());
    double var = 0.0;
    for (double z : raw) var += (z - mean) * (z - mean);
    var /= static_cast<double>(raw.size());
    if (var > 1e-24) rule.recenter_scale = opts.logit_std / std::sqrt(var);
  }
  auto mean_rate = [&](double shift) {
    double s = 0.0;
    for (double z : raw) s += sigmoid(rule.recenter_scale * z + shift);
    return s / static_cast<double>(raw.size());
  };
  double z_lo = raw.empty() ? 0.0 : rule.recenter_scale * raw[0];
  double z_hi = z_lo;
  for (double z : raw) {
    z_lo = std::min(z_lo, rule.recenter_scale * z);
    z_hi = std::max(z_hi, rule.recenter_scale * z);
  }
  double lo = -z_hi - 16.0, hi = -z_lo + 16.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mean_rate(mid) < opts.target_mean_rate)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-12) break;
  }
  rule.recenter_shift = 0.5 * (lo + hi);
  return rule;
}

double base_rate(const GroundTruthRule& rule, std::span<const double> feature) {
  return sigmoid(rule.recenter_scale * raw_rate(rule, feature) + rule.recenter_shift);
}

double InfluenceTracker::g_with(std::span<const double> x) const {
  const int n = static_cast<int>(sum_.size());
  // inclusive running mean: (sum_ + x) / (count_ + 1); the 1/(count_+1)
  // factor cancels in the cosine but is kept for clarity via b_scale.
  double scale = 1.0 / static_cast<double>(count_ + 1);
  // build sum_ + x on the fly without allocating
  double dot_ab = 0.0, na = 0.0, nb = 0.0;
  for (int i = 0; i < n; ++i) {
    double bv = (sum_[static_cast<size_t>(i)] + x[static_cast<size_t>(i)]) * scale;
    double av = x[static_cast<size_t>(i)];
    dot_ab += av * bv;
    na += av * av;
    nb += bv * bv;
  }
  double c = (na <= 0.0 || nb <= 0.0) ? 1.0 : dot_ab / (std::sqrt(na) * std::sqrt(nb));
  return g_from_cosine(mode_, c);
}

void InfluenceTracker::push(std::span<const double> x) {
  for (size_t i = 0; i < sum_.size(); ++i) sum_[i] += x[i];
  ++count_;
}

double mutual_influence(const GroundTruthRule& rule,
                        const std::vector<std::span<const double>>& features,
                        int i) {
  if (i < 1 || i > static_cast<int>(features.size()))
    throw DataError("mutual_influence position out of range");
  int d = static_cast<int>(features[0].size());
  std::vector<double> sum(static_cast<size_t>(d), 0.0);
  for (int j = 0; j < i; ++j)
    for (int k = 0; k < d; ++k) sum[static_cast<size_t>(k)] += features[static_cast<size_t>(j)][static_cast<size_t>(k)];
  double c = cosine_or_one(features[static_cast<size_t>(i) - 1], sum.data(),
                           1.0 / static_cast<double>(i), d);
  return g_from_cosine(rule.mode, c);
}

ScoredList score_list(const GroundTruthRule& rule, const ItemUniverse& universe,
                      const Slate& slate) {
  validate_slate(slate, universe);
  const int n = slate.size();
  if (n > rule.positions())
    throw ConfigError("slate longer than the rule's alpha schedule");
  ScoredList out;
  out.f.resize(static_cast<size_t>(n));
  InfluenceTracker tracker(universe.feature_dim, rule.mode);
  for (int i = 0; i < n; ++i) {
    auto x = universe.item(slate.item_ids[static_cast<size_t>(i)]);
    double r = base_rate(rule, x);
    double g = tracker.g_with(x);
    tracker.push(x);
    double a = rule.alpha[static_cast<size_t>(i)];
    double f = a * r + (1.0 - a) * g;
    out.f[static_cast<size_t>(i)] = f;
    out.true_score += f;
  }
  return out;
}

RuleScorer::RuleScorer(const GroundTruthRule& rule, const ItemUniverse& universe)
    : rule_(&rule), universe_(&universe) {
  rates_.resize(static_cast<size_t>(universe.num_items));
  for (int m = 0; m < universe.num_items; ++m)
    rates_[static_cast<size_t>(m)] = base_rate(rule, universe.item(m));
}

ScoredList RuleScorer::score(std::span<const int> item_ids) const {
  const int n = static_cast<int>(item_ids.size());
  if (n > rule_->positions())
    throw ConfigError("slate longer than the rule's alpha schedule");
  ScoredList out;
  out.f.resize(static_cast<size_t>(n));
  InfluenceTracker tracker(universe_->feature_dim, rule_->mode);
  for (int i = 0; i < n; ++i) {
    auto x = universe_->item(item_ids[static_cast<size_t>(i)]);
    double g = tracker.g_with(x);
    tracker.push(x);
    double a = rule_->alpha[static_cast<size_t>(i)];
    double f = a * rates_[static_cast<size_t>(item_ids[static_cast<size_t>(i)])] +
               (1.0 - a) * g;
    out.f[static_cast<size_t>(i)] = f;
    out.true_score += f;
  }
  return out;
}

SampledLabels sample_labels(const GroundTruthRule& rule,
                            const ItemUniverse& universe, const Slate& slate,
                            Rng& rng) {
  ScoredList scored = score_list(rule, universe, slate);
  SampledLabels labels;
  const int n = slate.size();
  labels.purchase.resize(static_cast<size_t>(n));
  labels.click.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double f = scored.f[static_cast<size_t>(i)];
    labels.purchase[static_cast<size_t>(i)] = rng.bernoulli(f) ? 1 : 0;
    labels.click[static_cast<size_t>(i)] = rng.bernoulli(std::sqrt(f)) ? 1 : 0;
  }
  return labels;
}

Slate relabel(const GroundTruthRule& rule, const ItemUniverse& universe,
              const Slate& slate, Rng& rng) {
  Slate fresh = slate;
  SampledLabels labels = sample_labels(rule, universe, slate, rng);
  fresh.purchase_labels = std::move(labels.purchase);
  fresh.click_labels = std::move(labels.click);
  return fresh;
}

void save_rule(const std::string& path, const GroundTruthRule& rule) {
  std::string arch = std::string("rule d ") + std::to_string(rule.feature_dim()) +
                     " N " + std::to_string(rule.positions()) + " mode " +
                     influence_mode_to_string(rule.mode);
  CheckpointDoc doc = checkpoint_of(rule.net, arch);
  Tensor alpha;
  alpha.shape = {rule.positions()};
  alpha.data = rule.alpha;
  doc.tensors.emplace_back("alpha", std::move(alpha));
  doc.tensors.emplace_back("recenter_scale", Tensor::scalar(rule.recenter_scale));
  doc.tensors.emplace_back("recenter_shift", Tensor::scalar(rule.recenter_shift));
  write_checkpoint(path, doc);
}

GroundTruthRule load_rule(const std::string& path) {
  CheckpointDoc doc = read_checkpoint(path);
  // arch: "rule d <d> N <n> mode <mode>"
  int d = 0, N = 0;
  char mode_buf[32] = {0};
  if (std::sscanf(doc.arch.c_str(), "rule d %d N %d mode %31s", &d, &N, mode_buf) != 3)
    throw IoError("unrecognized rule arch '" + doc.arch + "'");

  GroundTruthRule rule;
  rule.seed = doc.seed;
  rule.mode = influence_mode_from_string(mode_buf);
  rule.net_spec = rule_net_spec(d);
  rule.net = ParameterSet(doc.seed);
  Rng dummy(0);
  mlp_init(rule.net, kNetPrefix, rule.net_spec, dummy);
  for (int i = 0; i < rule.net.count(); ++i)
    rule.net.set_value(rule.net.info(i).name, doc.tensor(rule.net.info(i).name));
  rule.net.set_rng_seed(doc.seed);

  const Tensor& alpha = doc.tensor("alpha");
  if (alpha.numel() != N) throw IoError("rule alpha tensor has the wrong length");
  rule.alpha = alpha.data;
  rule.recenter_scale = doc.tensor("recenter_scale").data.at(0);
  rule.recenter_shift = doc.tensor("recenter_shift").data.at(0);
  return rule;
}

}  // namespace ranklab
