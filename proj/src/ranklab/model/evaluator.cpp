#include "ranklab/model/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
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

constexpr const char* kEnc = "enc";
constexpr const char* kLstm = "lstm";
constexpr const char* kPHead = "phead";
constexpr const char* kCHead = "chead";

void check_config(const EvaluatorConfig& cfg) {
  if (cfg.feature_dim <= 0 || cfg.bg_dim < 0)
    throw ConfigError("evaluator needs a positive feature_dim");
  if (cfg.enc_widths.empty() || cfg.hidden <= 0 || cfg.head_widths.empty())
    throw ConfigError("evaluator widths must be non-empty");
  if (cfg.enc_widths.back() != cfg.hidden)
    throw ConfigError("evaluator encoder output width " +
                      std::to_string(cfg.enc_widths.back()) +
                      " must equal hidden width " + std::to_string(cfg.hidden) +
                      " (h_0 is the mean candidate encoding)");
  if (cfg.click_weight < 0.0)
    throw ConfigError("click_weight must be non-negative");
}

}  // namespace

Evaluator::Evaluator(EvaluatorConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  check_config(cfg_);
  std::vector<int> enc_w{cfg_.feature_dim + cfg_.bg_dim};
  enc_w.insert(enc_w.end(), cfg_.enc_widths.begin(), cfg_.enc_widths.end());
  enc_spec_ = MlpSpec(enc_w, Act::relu, Act::relu);

  const int s_width = cfg_.enc_widths.back();
  lstm_spec_ = LstmSpec{s_width, cfg_.hidden};

  std::vector<int> head_w{s_width + cfg_.hidden};
  head_w.insert(head_w.end(), cfg_.head_widths.begin(), cfg_.head_widths.end());
  head_w.push_back(1);
  phead_spec_ = MlpSpec(head_w, Act::relu, Act::none);
  chead_spec_ = phead_spec_;

  params_ = ParameterSet(seed);
  Rng rng(mix_seed(seed, "evaluator"));
  mlp_init(params_, kEnc, enc_spec_, rng);
  lstm_init(params_, kLstm, lstm_spec_, rng);
  mlp_init(params_, kPHead, phead_spec_, rng);
  mlp_init(params_, kCHead, chead_spec_, rng);
}

// ---------------------------------------------------------------------------
// Incremental scorer

EvaluatorScorer::EvaluatorScorer(const Evaluator& model,
                                 const ItemUniverse& universe)
    : model_(&model), universe_(&universe) {
  enc_ref_ = mlp_ref(model.params_, kEnc, model.enc_spec_);
  phead_ref_ = mlp_ref(model.params_, kPHead, model.phead_spec_);
  chead_ref_ = mlp_ref(model.params_, kCHead, model.chead_spec_);
  lstm_ref_ = lstm_ref(model.params_, kLstm, model.lstm_spec_);
}

void EvaluatorScorer::begin(std::span<const int> candidate_ids,
                            std::span<const double> bg) {
  if (static_cast<int>(bg.size()) != model_->cfg_.bg_dim)
    throw ConfigError("bg width " + std::to_string(bg.size()) + ", expected " +
                      std::to_string(model_->cfg_.bg_dim));
  ids_.assign(candidate_ids.begin(), candidate_ids.end());
  const int n = static_cast<int>(ids_.size());
  const int s_width = model_->lstm_spec_.input;
  s_.resize(static_cast<size_t>(n));
  in_.resize(static_cast<size_t>(model_->cfg_.feature_dim + model_->cfg_.bg_dim));
  h0_.assign(static_cast<size_t>(model_->cfg_.hidden), 0.0);
  for (int i = 0; i < n; ++i) {
    auto x = universe_->item(ids_[static_cast<size_t>(i)]);
    std::copy(x.begin(), x.end(), in_.begin());
    std::copy(bg.begin(), bg.end(), in_.begin() + x.size());
    auto& si = s_[static_cast<size_t>(i)];
    si.resize(static_cast<size_t>(s_width));
    mlp_forward(model_->params_, enc_ref_, in_, si, enc_cache_);
    for (int j = 0; j < model_->cfg_.hidden; ++j)
      h0_[static_cast<size_t>(j)] += si[static_cast<size_t>(j)];
  }
  if (n > 0)
    for (double& v : h0_) v /= static_cast<double>(n);
}

EvaluatorScorer::State EvaluatorScorer::initial_state() const {
  State st;
  st.h = h0_;
  st.c.assign(static_cast<size_t>(model_->cfg_.hidden), 0.0);
  st.t = 0;
  return st;
}

double EvaluatorScorer::step(State& st, int slot, double* p_click) {
  const auto& si = s_[static_cast<size_t>(slot)];
  lstm_step(model_->params_, lstm_ref_, st.h, st.c, si, st.h, st.c, lstm_cache_);
  cat_.resize(si.size() + st.h.size());
  std::copy(si.begin(), si.end(), cat_.begin());
  std::copy(st.h.begin(), st.h.end(), cat_.begin() + si.size());
  double z = 0.0;
  mlp_forward(model_->params_, phead_ref_, cat_, std::span<double>(&z, 1),
              head_cache_);
  double p = sigmoid(z);
  if (p_click) {
    double zc = 0.0;
    mlp_forward(model_->params_, chead_ref_, cat_, std::span<double>(&zc, 1),
                head_cache_);
    *p_click = sigmoid(zc);
  }
  ++st.t;
  return p;
}

ListScore Evaluator::score(const ItemUniverse& universe, const Slate& slate) const {
  validate_slate(slate, universe);
  EvaluatorScorer scorer(*this, universe);
  scorer.begin(slate.item_ids, slate.bg);
  EvaluatorScorer::State st = scorer.initial_state();
  ListScore out;
  const int n = slate.size();
  out.p.resize(static_cast<size_t>(n));
  out.p_click.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double pc = 0.0;
    out.p[static_cast<size_t>(i)] = scorer.step(st, i, &pc);
    out.p_click[static_cast<size_t>(i)] = pc;
    out.total += out.p[static_cast<size_t>(i)];
  }
  return out;
}

std::vector<ListScore> score_batch(const Evaluator& model,
                                   const ItemUniverse& universe,
                                   const std::vector<Slate>& slates) {
  std::vector<ListScore> out(slates.size());
  parallel_for(static_cast<int64_t>(slates.size()), [&](int64_t i) {
    out[static_cast<size_t>(i)] = model.score(universe, slates[static_cast<size_t>(i)]);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct EvalRefs {
  MlpRef enc, phead, chead;
  LstmRef lstm;
};

// Per-list forward/backward workspace; one per minibatch slot so parallel
// lists never share mutable state and gradient reduction stays in index
// order.
struct ListWorkspace {
  std::vector<MlpCache> enc_caches;
  std::vector<std::vector<double>> s, ds;
  std::vector<LstmCache> lstm_caches;
  std::vector<MlpCache> ph_caches, ch_caches;
  std::vector<std::vector<double>> h_seq;           // h_i after each step
  std::vector<double> p, pc;
  std::vector<double> h0, in, cat, dcat_p, dcat_c, dh, dc, dh_prev, dc_prev, dx;
  GradBuffer grads;

  double forward_backward(const Evaluator& model, const EvalRefs& refs,
                          const ItemUniverse& universe, const Slate& slate,
                          double click_weight, bool backward);
};

double ListWorkspace::forward_backward(const Evaluator& model,
                                       const EvalRefs& refs,
                                       const ItemUniverse& universe,
                                       const Slate& slate, double click_weight,
                                       bool backward) {
  const ParameterSet& ps = model.params();
  const EvaluatorConfig& cfg = model.config();
  const int n = slate.size();
  const int S = refs.lstm.spec.input;
  const int H = refs.lstm.spec.hidden;

  enc_caches.resize(static_cast<size_t>(n));
  s.resize(static_cast<size_t>(n));
  ds.resize(static_cast<size_t>(n));
  lstm_caches.resize(static_cast<size_t>(n));
  ph_caches.resize(static_cast<size_t>(n));
  ch_caches.resize(static_cast<size_t>(n));
  h_seq.resize(static_cast<size_t>(n));
  p.resize(static_cast<size_t>(n));
  pc.resize(static_cast<size_t>(n));

  in.resize(static_cast<size_t>(cfg.feature_dim + cfg.bg_dim));
  h0.assign(static_cast<size_t>(H), 0.0);
  for (int i = 0; i < n; ++i) {
    auto x = universe.item(slate.item_ids[static_cast<size_t>(i)]);
    std::copy(x.begin(), x.end(), in.begin());
    std::copy(slate.bg.begin(), slate.bg.end(), in.begin() + x.size());
    auto& si = s[static_cast<size_t>(i)];
    si.resize(static_cast<size_t>(S));
    mlp_forward(ps, refs.enc, in, si, enc_caches[static_cast<size_t>(i)]);
    for (int j = 0; j < H; ++j) h0[static_cast<size_t>(j)] += si[static_cast<size_t>(j)];
  }
  for (double& v : h0) v /= static_cast<double>(n);

  // recurrence + heads
  std::vector<double>& hprev = dh;  // reuse buffers for the forward state
  std::vector<double>& cprev = dc;
  hprev = h0;
  cprev.assign(static_cast<size_t>(H), 0.0);
  cat.resize(static_cast<size_t>(S + H));
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    auto& hi = h_seq[static_cast<size_t>(i)];
    hi.resize(static_cast<size_t>(H));
    lstm_step(ps, refs.lstm, hprev, cprev, s[static_cast<size_t>(i)], hi, cprev,
              lstm_caches[static_cast<size_t>(i)]);
    hprev = hi;
    std::copy(s[static_cast<size_t>(i)].begin(), s[static_cast<size_t>(i)].end(),
              cat.begin());
    std::copy(hi.begin(), hi.end(), cat.begin() + S);
    double z = 0.0, zc = 0.0;
    mlp_forward(ps, refs.phead, cat, std::span<double>(&z, 1),
                ph_caches[static_cast<size_t>(i)]);
    mlp_forward(ps, refs.chead, cat, std::span<double>(&zc, 1),
                ch_caches[static_cast<size_t>(i)]);
    p[static_cast<size_t>(i)] = sigmoid(z);
    pc[static_cast<size_t>(i)] = sigmoid(zc);
    double y = static_cast<double>(slate.purchase_labels[static_cast<size_t>(i)]);
    double ycl = static_cast<double>(slate.click_labels[static_cast<size_t>(i)]);
    loss += binary_cross_entropy(p[static_cast<size_t>(i)], y) +
            click_weight * binary_cross_entropy(pc[static_cast<size_t>(i)], ycl);
  }
  if (!backward) return loss;

  if (grads.empty()) grads.reset(ps);
  dcat_p.resize(static_cast<size_t>(S + H));
  dcat_c.resize(static_cast<size_t>(S + H));
  for (int i = 0; i < n; ++i)
    ds[static_cast<size_t>(i)].assign(static_cast<size_t>(S), 0.0);
  dh.assign(static_cast<size_t>(H), 0.0);
  dc.assign(static_cast<size_t>(H), 0.0);
  dh_prev.resize(static_cast<size_t>(H));
  dc_prev.resize(static_cast<size_t>(H));
  dx.resize(static_cast<size_t>(S));

  for (int i = n - 1; i >= 0; --i) {
    // heads: d(loss)/dz = p - y through the fused sigmoid + cross-entropy
    double y = static_cast<double>(slate.purchase_labels[static_cast<size_t>(i)]);
    double ycl = static_cast<double>(slate.click_labels[static_cast<size_t>(i)]);
    double dz = p[static_cast<size_t>(i)] - y;
    double dzc = click_weight * (pc[static_cast<size_t>(i)] - ycl);
    mlp_backward(ps, refs.phead, ph_caches[static_cast<size_t>(i)],
                 std::span<const double>(&dz, 1), dcat_p, grads);
    mlp_backward(ps, refs.chead, ch_caches[static_cast<size_t>(i)],
                 std::span<const double>(&dzc, 1), dcat_c, grads);
    auto& dsi = ds[static_cast<size_t>(i)];
    for (int j = 0; j < S; ++j)
      dsi[static_cast<size_t>(j)] +=
          dcat_p[static_cast<size_t>(j)] + dcat_c[static_cast<size_t>(j)];
    for (int j = 0; j < H; ++j)
      dh[static_cast<size_t>(j)] +=
          dcat_p[static_cast<size_t>(S + j)] + dcat_c[static_cast<size_t>(S + j)];

    lstm_backward(ps, refs.lstm, lstm_caches[static_cast<size_t>(i)], dh, dc,
                  dh_prev, dc_prev, dx, grads);
    for (int j = 0; j < S; ++j) dsi[static_cast<size_t>(j)] += dx[static_cast<size_t>(j)];
    dh.swap(dh_prev);
    dc.swap(dc_prev);
  }
  // h0 = mean of candidate encodings: spread dh0 over every item's ds
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int i = 0; i < n; ++i) {
    auto& dsi = ds[static_cast<size_t>(i)];
    for (int j = 0; j < H; ++j)
      dsi[static_cast<size_t>(j)] += dh[static_cast<size_t>(j)] * inv_n;
    mlp_backward(ps, refs.enc, enc_caches[static_cast<size_t>(i)], dsi, {}, grads);
  }
  return loss;
}

}  // namespace

TrainResult Evaluator::train(const Dataset& train_data, const Dataset& val_data,
                             const ItemUniverse& universe, uint64_t seed) {
  if (train_data.slates.empty() || val_data.slates.empty())
    throw DataError("evaluator training needs non-empty train and validation sets");
  for (const Slate& s : train_data.slates)
    if (!s.labeled() || s.click_labels.empty())
      throw DataError("evaluator training needs purchase and click labels");

  double click_weight = cfg_.click_weight;
  if (cfg_.auto_click_weight) {
    int64_t purchases = 0, clicks = 0;
    for (const Slate& s : train_data.slates) {
      for (int y : s.purchase_labels) purchases += y;
      for (int y : s.click_labels) clicks += y;
    }
    click_weight = clicks > 0
                       ? static_cast<double>(purchases) / static_cast<double>(clicks)
                       : 0.0;
  }

  EvalRefs refs{mlp_ref(params_, kEnc, enc_spec_),
                mlp_ref(params_, kPHead, phead_spec_),
                mlp_ref(params_, kCHead, chead_spec_),
                lstm_ref(params_, kLstm, lstm_spec_)};

  const int batch = std::max(1, cfg_.batch_lists);
  std::vector<ListWorkspace> slots(static_cast<size_t>(batch));
  std::vector<double> slot_loss(static_cast<size_t>(batch), 0.0);
  Adam adam(params_, AdamConfig{cfg_.learning_rate, 0.9, 0.999, 1e-8});

  std::vector<int> order(train_data.slates.size());
  std::iota(order.begin(), order.end(), 0);

  // per-list validation losses, reduced serially for thread-count invariance
  std::vector<double> val_losses(val_data.slates.size(), 0.0);
  auto validation_loss = [&]() {
    for (size_t start = 0; start < val_data.slates.size();
         start += static_cast<size_t>(batch)) {
      const int b = static_cast<int>(
          std::min(val_data.slates.size() - start, static_cast<size_t>(batch)));
      parallel_for(b, [&](int64_t w) {
        val_losses[start + static_cast<size_t>(w)] =
            slots[static_cast<size_t>(w)].forward_backward(
                *this, refs, universe,
                val_data.slates[start + static_cast<size_t>(w)], click_weight,
                false);
      });
    }
    double sum = 0.0;
    for (double v : val_losses) sum += v;
    return sum / static_cast<double>(val_losses.size());
  };

  TrainResult result;
  result.click_weight_used = click_weight;
  std::vector<double> best_values;
  double best_val = 0.0;
  int epochs_since_best = 0;

  for (int epoch = 1; epoch <= cfg_.max_epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(mix_seed(seed, "eval-shuffle"), static_cast<uint64_t>(epoch)));
    shuffle(order, shuffle_rng);

    double train_loss_sum = 0.0;
    int64_t lists_seen = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch)) {
      const int b = static_cast<int>(std::min(order.size() - start, static_cast<size_t>(batch)));
      parallel_for(b, [&](int64_t w) {
        ListWorkspace& ws = slots[static_cast<size_t>(w)];
        if (ws.grads.empty()) ws.grads.reset(params_);
        ws.grads.clear();
        slot_loss[static_cast<size_t>(w)] = ws.forward_backward(
            *this, refs, universe,
            train_data.slates[static_cast<size_t>(order[start + static_cast<size_t>(w)])],
            click_weight, true);
      });
      params_.zero_grads();
      double batch_loss = 0.0;
      for (int w = 0; w < b; ++w) {
        slots[static_cast<size_t>(w)].grads.add_to(params_, 1.0 / b);
        batch_loss += slot_loss[static_cast<size_t>(w)];
      }
      if (!std::isfinite(batch_loss))
        throw DivergenceError("non-finite evaluator loss at epoch " +
                              std::to_string(epoch));
      train_loss_sum += batch_loss;
      lists_seen += b;
      adam.update(params_);
    }

    EpochRow row;
    row.epoch = epoch;
    row.train_loss = train_loss_sum / static_cast<double>(lists_seen);
    row.val_loss = validation_loss();
    result.epochs.push_back(row);

    if (best_values.empty() || row.val_loss < best_val) {
      best_val = row.val_loss;
      result.best_epoch = epoch;
      best_values.assign(params_.flat_values().begin(), params_.flat_values().end());
      epochs_since_best = 0;
    } else if (++epochs_since_best >= cfg_.patience) {
      break;
    }
  }

  if (!best_values.empty()) {
    auto v = params_.mutable_flat_values();
    std::copy(best_values.begin(), best_values.end(), v.begin());
  }
  return result;
}

double evaluator_loss(Evaluator& model, const ItemUniverse& universe,
                      const std::vector<Slate>& slates, double click_weight,
                      bool backward) {
  if (slates.empty()) throw DataError("evaluator_loss over an empty batch");
  EvalRefs refs{mlp_ref(model.params(), kEnc, model.enc_spec_),
                mlp_ref(model.params(), kPHead, model.phead_spec_),
                mlp_ref(model.params(), kCHead, model.chead_spec_),
                lstm_ref(model.params(), kLstm, model.lstm_spec_)};
  ListWorkspace ws;
  if (backward) {
    model.params().zero_grads();
    ws.grads.reset(model.params());
  }
  double loss = 0.0;
  for (const Slate& s : slates)
    loss += ws.forward_backward(model, refs, universe, s, click_weight, backward);
  loss /= static_cast<double>(slates.size());
  if (backward)
    ws.grads.add_to(model.params(), 1.0 / static_cast<double>(slates.size()));
  return loss;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {
std::string evaluator_arch(const EvaluatorConfig& cfg) {
  return "evaluator feature_dim " + std::to_string(cfg.feature_dim) +
         " bg_dim " + std::to_string(cfg.bg_dim) + " enc " +
         join_widths(cfg.enc_widths) + " hidden " + std::to_string(cfg.hidden) +
         " head " + join_widths(cfg.head_widths) + " click_weight " +
         format_double(cfg.click_weight);
}
}  // namespace

void Evaluator::save(const std::string& path) const {
  write_checkpoint(path, checkpoint_of(params_, evaluator_arch(cfg_)));
}

Evaluator Evaluator::load(const std::string& path) {
  CheckpointDoc doc = read_checkpoint(path);
  std::istringstream is(doc.arch);
  std::string tag, key, enc_s, head_s;
  EvaluatorConfig cfg;
  is >> tag;
  if (tag != "evaluator")
    throw IoError("checkpoint '" + path + "' is not an evaluator (arch '" +
                  doc.arch + "')");
  while (is >> key) {
    if (key == "feature_dim") is >> cfg.feature_dim;
    else if (key == "bg_dim") is >> cfg.bg_dim;
    else if (key == "enc") { is >> enc_s; cfg.enc_widths = parse_widths(enc_s); }
    else if (key == "hidden") is >> cfg.hidden;
    else if (key == "head") { is >> head_s; cfg.head_widths = parse_widths(head_s); }
    else if (key == "click_weight") is >> cfg.click_weight;
    else throw IoError("unknown evaluator arch key '" + key + "'");
  }
  Evaluator model(cfg, doc.seed);
  load_into(model.params_, doc);
  return model;
}

// ---------------------------------------------------------------------------
// Requirement checks and the generalization gap

namespace {

// correct = 1, tie = 0.5, wrong = 0; pairs with equal true scores are
// unusable and signalled by a negative return.
double pair_correctness(double model_a, double model_b, double true_a,
                        double true_b) {
  if (true_a == true_b) return -1.0;
  if (model_a == model_b) return 0.5;
  bool model_prefers_a = model_a > model_b;
  bool truth_prefers_a = true_a > true_b;
  return model_prefers_a == truth_prefers_a ? 1.0 : 0.0;
}

}  // namespace

RequirementAccuracy requirement_check(const Evaluator& model,
                                      const Dataset& test_data,
                                      const ItemUniverse& universe,
                                      const GroundTruthRule& rule,
                                      uint64_t seed, int min_pairs) {
  const size_t n = test_data.slates.size();
  if (n == 0) throw DataError("requirement_check on an empty dataset");

  // Build logged, reversed, and shuffled variants, then score everything.
  std::vector<Slate> variants;
  variants.reserve(3 * n);
  for (const Slate& s : test_data.slates) variants.push_back(s);
  for (const Slate& s : test_data.slates) {
    Slate r = s;
    std::reverse(r.item_ids.begin(), r.item_ids.end());
    variants.push_back(std::move(r));
  }
  for (size_t i = 0; i < n; ++i) {
    Slate sh = test_data.slates[i];
    Rng rng(mix_seed(mix_seed(seed, "req-shuffle"), static_cast<uint64_t>(i)));
    shuffle(sh.item_ids, rng);
    variants.push_back(std::move(sh));
  }

  std::vector<double> model_scores(variants.size(), 0.0);
  std::vector<double> true_scores(variants.size(), 0.0);
  RuleScorer rule_scorer(rule, universe);
  parallel_for(static_cast<int64_t>(variants.size()), [&](int64_t i) {
    const Slate& s = variants[static_cast<size_t>(i)];
    model_scores[static_cast<size_t>(i)] = model.list_score(universe, s);
    true_scores[static_cast<size_t>(i)] = rule_scorer.true_score(s.item_ids);
  });

  RequirementAccuracy acc;
  double sum_rev = 0.0, sum_shuf = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double c = pair_correctness(model_scores[i], model_scores[n + i],
                                true_scores[i], true_scores[n + i]);
    if (c >= 0.0) {
      sum_rev += c;
      ++acc.pairs_reversed;
    }
    c = pair_correctness(model_scores[i], model_scores[2 * n + i],
                         true_scores[i], true_scores[2 * n + i]);
    if (c >= 0.0) {
      sum_shuf += c;
      ++acc.pairs_shuffled;
    }
  }

  // label-separated pairs: one list with >= 1 purchase vs one with none
  std::vector<size_t> with_purchase, without_purchase;
  for (size_t i = 0; i < n; ++i) {
    const Slate& s = test_data.slates[i];
    int total = 0;
    for (int y : s.purchase_labels) total += y;
    (total > 0 ? with_purchase : without_purchase).push_back(i);
  }
  // Mann-Whitney style: every (with, without) combination counts, capped so
  // the check stays cheap when both sides are large.  Scores are already
  // computed, so each pair is one comparison.
  double sum_sep = 0.0;
  const uint64_t num_with = with_purchase.size();
  const uint64_t num_without = without_purchase.size();
  const uint64_t all_pairs = num_with * num_without;
  const uint64_t pair_cap = uint64_t(1) << 21;
  auto sep_pair = [&](size_t wi, size_t wo) {
    double a = model_scores[with_purchase[wi]];
    double b = model_scores[without_purchase[wo]];
    sum_sep += (a == b) ? 0.5 : (a > b ? 1.0 : 0.0);
    ++acc.pairs_label_separated;
  };
  if (all_pairs <= pair_cap) {
    for (size_t wi = 0; wi < num_with; ++wi)
      for (size_t wo = 0; wo < num_without; ++wo) sep_pair(wi, wo);
  } else if (num_with > 0 && num_without > 0) {
    Rng pair_rng(mix_seed(seed, "req-label-pairs"));
    for (uint64_t k = 0; k < pair_cap; ++k) {
      size_t wi = static_cast<size_t>(pair_rng.index(static_cast<int>(num_with)));
      size_t wo =
          static_cast<size_t>(pair_rng.index(static_cast<int>(num_without)));
      sep_pair(wi, wo);
    }
  }

  if (acc.pairs_reversed < min_pairs || acc.pairs_shuffled < min_pairs ||
      acc.pairs_label_separated < min_pairs)
    throw DataError("requirement_check has fewer than " +
                    std::to_string(min_pairs) +
                    " usable pairs in at least one family (reversed " +
                    std::to_string(acc.pairs_reversed) + ", shuffled " +
                    std::to_string(acc.pairs_shuffled) + ", label-separated " +
                    std::to_string(acc.pairs_label_separated) + ")");

  acc.acc_reversed = sum_rev / acc.pairs_reversed;
  acc.acc_shuffled = sum_shuf / acc.pairs_shuffled;
  acc.acc_label_separated = sum_sep / acc.pairs_label_separated;
  return acc;
}

std::vector<double> list_score_errors(const Evaluator& model,
                                      const Dataset& data,
                                      const ItemUniverse& universe,
                                      const GroundTruthRule& rule) {
  if (data.slates.empty())
    throw DataError("list score errors on an empty set");
  RuleScorer rule_scorer(rule, universe);
  std::vector<double> err(data.slates.size(), 0.0);
  parallel_for(static_cast<int64_t>(data.slates.size()), [&](int64_t i) {
    const Slate& s = data.slates[static_cast<size_t>(i)];
    err[static_cast<size_t>(i)] = std::abs(model.list_score(universe, s) -
                                           rule_scorer.true_score(s.item_ids));
  });
  return err;
}

GapResult generalization_gap(const Evaluator& model, const Dataset& on_data,
                             const Dataset& off_data,
                             const ItemUniverse& universe,
                             const GroundTruthRule& rule) {
  auto mae = [&](const Dataset& data) {
    std::vector<double> err = list_score_errors(model, data, universe, rule);
    double sum = 0.0;
    for (double e : err) sum += e;
    return sum / static_cast<double>(err.size());
  };
  return GapResult{mae(on_data), mae(off_data)};
}

}  // namespace ranklab
