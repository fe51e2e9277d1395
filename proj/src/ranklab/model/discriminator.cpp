#include "ranklab/model/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ranklab/core/checkpoint.hpp"
#include "ranklab/core/error.hpp"
#include "ranklab/core/ops.hpp"
#include "ranklab/core/parallel.hpp"
#include "ranklab/core/rng.hpp"

namespace ranklab {

namespace {

constexpr const char* kEnc = "enc";
constexpr const char* kHead = "head";
constexpr const char* kLstm = "lstm";

void check_config(const DiscriminatorConfig& cfg) {
  if (cfg.feature_dim <= 0 || cfg.bg_dim < 0)
    throw ConfigError("discriminator needs a positive feature_dim");
  if (cfg.enc_widths.empty() || cfg.hidden <= 0 || cfg.head_widths.empty())
    throw ConfigError("discriminator widths must be non-empty");
}

}  // namespace

Discriminator::Discriminator(DiscriminatorConfig cfg, uint64_t seed)
    : cfg_(std::move(cfg)) {
  check_config(cfg_);
  std::vector<int> enc_w{cfg_.feature_dim + cfg_.bg_dim};
  enc_w.insert(enc_w.end(), cfg_.enc_widths.begin(), cfg_.enc_widths.end());
  enc_spec_ = MlpSpec(enc_w, Act::relu, Act::relu);

  lstm_spec_ = LstmSpec{cfg_.enc_widths.back(), cfg_.hidden};

  std::vector<int> head_w{cfg_.enc_widths.back() + cfg_.hidden};
  head_w.insert(head_w.end(), cfg_.head_widths.begin(), cfg_.head_widths.end());
  head_w.push_back(1);
  head_spec_ = MlpSpec(head_w, Act::relu, Act::none);

  params_ = ParameterSet(seed);
  Rng rng(mix_seed(seed, "discriminator"));
  mlp_init(params_, kEnc, enc_spec_, rng);
  lstm_init(params_, kLstm, lstm_spec_, rng);
  mlp_init(params_, kHead, head_spec_, rng);
}

// ---------------------------------------------------------------------------
// Scoring

DiscriminatorScorer::DiscriminatorScorer(const Discriminator& model,
                                         const ItemUniverse& universe)
    : model_(&model), universe_(&universe) {
  enc_ref_ = mlp_ref(model.params_, kEnc, model.enc_spec_);
  head_ref_ = mlp_ref(model.params_, kHead, model.head_spec_);
  lstm_ref_ = lstm_ref(model.params_, kLstm, model.lstm_spec_);
}

void DiscriminatorScorer::begin(std::span<const int> candidate_ids,
                                std::span<const double> bg) {
  if (static_cast<int>(bg.size()) != model_->cfg_.bg_dim)
    throw ConfigError("bg width " + std::to_string(bg.size()) + ", expected " +
                      std::to_string(model_->cfg_.bg_dim));
  ids_.assign(candidate_ids.begin(), candidate_ids.end());
  const int n = static_cast<int>(ids_.size());
  const int s_width = model_->lstm_spec_.input;
  s_.resize(static_cast<size_t>(n));
  in_.resize(static_cast<size_t>(model_->cfg_.feature_dim + model_->cfg_.bg_dim));
  for (int i = 0; i < n; ++i) {
    auto x = universe_->item(ids_[static_cast<size_t>(i)]);
    std::copy(x.begin(), x.end(), in_.begin());
    std::copy(bg.begin(), bg.end(), in_.begin() + x.size());
    auto& si = s_[static_cast<size_t>(i)];
    si.resize(static_cast<size_t>(s_width));
    mlp_forward(model_->params_, enc_ref_, in_, si, enc_cache_);
  }
  cat_.resize(static_cast<size_t>(s_width + model_->cfg_.hidden));
}

DiscriminatorScorer::State DiscriminatorScorer::initial_state() const {
  State st;
  st.h.assign(static_cast<size_t>(model_->cfg_.hidden), 0.0);
  st.c.assign(static_cast<size_t>(model_->cfg_.hidden), 0.0);
  st.t = 0;
  return st;
}

double DiscriminatorScorer::step(State& st, int slot) {
  const auto& si = s_[static_cast<size_t>(slot)];
  lstm_step(model_->params_, lstm_ref_, st.h, st.c, si, st.h, st.c, lstm_cache_);
  std::copy(si.begin(), si.end(), cat_.begin());
  std::copy(st.h.begin(), st.h.end(), cat_.begin() + static_cast<long>(si.size()));
  double z = 0.0;
  mlp_forward(model_->params_, head_ref_, cat_, std::span<double>(&z, 1),
              head_cache_);
  ++st.t;
  return sigmoid(z);
}

ListRealness Discriminator::score_list(const ItemUniverse& universe,
                                       const Slate& slate) const {
  validate_slate(slate, universe);
  DiscriminatorScorer scorer(*this, universe);
  scorer.begin(slate.item_ids, slate.bg);
  DiscriminatorScorer::State st = scorer.initial_state();
  ListRealness out;
  out.scores.resize(static_cast<size_t>(slate.size()));
  for (int i = 0; i < slate.size(); ++i) {
    out.scores[static_cast<size_t>(i)] = scorer.step(st, i);
    out.total += out.scores[static_cast<size_t>(i)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct DiscRefs {
  MlpRef enc, head;
  LstmRef lstm;
};

}  // namespace

// One per parallel slot: forward activations, caches and a private gradient
// buffer so the cross-list reduction happens serially in index order.
struct DiscriminatorTrainer::Workspace {
  std::vector<MlpCache> enc_caches;
  std::vector<std::vector<double>> s, ds;
  std::vector<LstmCache> lstm_caches;
  std::vector<MlpCache> head_caches;
  std::vector<std::vector<double>> h_seq;
  std::vector<double> p;
  std::vector<double> in, cat, dcat, dh, dc, dh_prev, dc_prev, dx;
  GradBuffer grads;
  double mean_prob = 0.0;
  double loss = 0.0;

  void forward_backward(const Discriminator& model, const DiscRefs& refs,
                        const ItemUniverse& universe, const Slate& slate,
                        double target, bool backward);
};

void DiscriminatorTrainer::Workspace::forward_backward(
    const Discriminator& model, const DiscRefs& refs,
    const ItemUniverse& universe, const Slate& slate, double target,
    bool backward) {
  const ParameterSet& ps = model.params_;
  const DiscriminatorConfig& cfg = model.cfg_;
  const int n = slate.size();
  const int S = refs.enc.spec.output_width();
  const int H = cfg.hidden;
  if (n == 0) throw DataError("discriminator got an empty list");
  if (static_cast<int>(slate.bg.size()) != cfg.bg_dim)
    throw ConfigError("bg width " + std::to_string(slate.bg.size()) +
                      ", expected " + std::to_string(cfg.bg_dim));

  enc_caches.resize(static_cast<size_t>(n));
  s.resize(static_cast<size_t>(n));
  ds.resize(static_cast<size_t>(n));
  lstm_caches.resize(static_cast<size_t>(n));
  head_caches.resize(static_cast<size_t>(n));
  h_seq.resize(static_cast<size_t>(n));
  p.resize(static_cast<size_t>(n));

  in.resize(static_cast<size_t>(cfg.feature_dim + cfg.bg_dim));
  for (int i = 0; i < n; ++i) {
    auto x = universe.item(slate.item_ids[static_cast<size_t>(i)]);
    std::copy(x.begin(), x.end(), in.begin());
    std::copy(slate.bg.begin(), slate.bg.end(), in.begin() + x.size());
    auto& si = s[static_cast<size_t>(i)];
    si.resize(static_cast<size_t>(S));
    mlp_forward(ps, refs.enc, in, si, enc_caches[static_cast<size_t>(i)]);
  }

  std::vector<double>& hprev = dh;  // reuse buffers for the forward state
  std::vector<double>& cprev = dc;
  hprev.assign(static_cast<size_t>(H), 0.0);
  cprev.assign(static_cast<size_t>(H), 0.0);
  cat.resize(static_cast<size_t>(S + H));
  loss = 0.0;
  double prob_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    auto& hi = h_seq[static_cast<size_t>(i)];
    hi.resize(static_cast<size_t>(H));
    lstm_step(ps, refs.lstm, hprev, cprev, s[static_cast<size_t>(i)], hi, cprev,
              lstm_caches[static_cast<size_t>(i)]);
    hprev = hi;
    std::copy(s[static_cast<size_t>(i)].begin(), s[static_cast<size_t>(i)].end(),
              cat.begin());
    std::copy(hi.begin(), hi.end(), cat.begin() + S);
    double z = 0.0;
    mlp_forward(ps, refs.head, cat, std::span<double>(&z, 1),
                head_caches[static_cast<size_t>(i)]);
    p[static_cast<size_t>(i)] = sigmoid(z);
    prob_sum += p[static_cast<size_t>(i)];
    loss += binary_cross_entropy(p[static_cast<size_t>(i)], target);
  }
  mean_prob = prob_sum / static_cast<double>(n);
  if (!backward) return;

  if (grads.empty()) grads.reset(ps);
  dcat.resize(static_cast<size_t>(S + H));
  for (int i = 0; i < n; ++i)
    ds[static_cast<size_t>(i)].assign(static_cast<size_t>(S), 0.0);
  dh.assign(static_cast<size_t>(H), 0.0);
  dc.assign(static_cast<size_t>(H), 0.0);
  dh_prev.resize(static_cast<size_t>(H));
  dc_prev.resize(static_cast<size_t>(H));
  dx.resize(static_cast<size_t>(S));

  for (int i = n - 1; i >= 0; --i) {
    double dz = p[static_cast<size_t>(i)] - target;  // fused sigmoid + BCE
    mlp_backward(ps, refs.head, head_caches[static_cast<size_t>(i)],
                 std::span<const double>(&dz, 1), dcat, grads);
    auto& dsi = ds[static_cast<size_t>(i)];
    for (int j = 0; j < S; ++j) dsi[static_cast<size_t>(j)] += dcat[static_cast<size_t>(j)];
    for (int j = 0; j < H; ++j)
      dh[static_cast<size_t>(j)] += dcat[static_cast<size_t>(S + j)];
    lstm_backward(ps, refs.lstm, lstm_caches[static_cast<size_t>(i)], dh, dc,
                  dh_prev, dc_prev, dx, grads);
    for (int j = 0; j < S; ++j) dsi[static_cast<size_t>(j)] += dx[static_cast<size_t>(j)];
    dh.swap(dh_prev);
    dc.swap(dc_prev);
  }
  // The initial state is constant zero, so dh/dc at the front are dropped.
  for (int i = 0; i < n; ++i)
    mlp_backward(ps, refs.enc, enc_caches[static_cast<size_t>(i)],
                 ds[static_cast<size_t>(i)], {}, grads);
}

DiscriminatorTrainer::DiscriminatorTrainer(Discriminator& model,
                                           const ItemUniverse& universe,
                                           double learning_rate)
    : model_(&model),
      universe_(&universe),
      opt_(model.params(), AdamConfig{learning_rate, 0.9, 0.999, 1e-8}) {}

DiscriminatorTrainer::~DiscriminatorTrainer() = default;
DiscriminatorTrainer::DiscriminatorTrainer(DiscriminatorTrainer&&) noexcept = default;
DiscriminatorTrainer& DiscriminatorTrainer::operator=(DiscriminatorTrainer&&) noexcept =
    default;

double DiscriminatorTrainer::run(const std::vector<Slate>& real_lists,
                                 const std::vector<Slate>& generated_lists,
                                 bool backward, double* accuracy) {
  const int n_real = static_cast<int>(real_lists.size());
  const int n_gen = static_cast<int>(generated_lists.size());
  const int total = n_real + n_gen;
  if (total == 0) throw DataError("discriminator step got no lists");

  while (static_cast<int>(slots_.size()) < total)
    slots_.push_back(std::make_unique<Workspace>());

  DiscRefs refs{mlp_ref(model_->params_, kEnc, model_->enc_spec_),
                mlp_ref(model_->params_, kHead, model_->head_spec_),
                lstm_ref(model_->params_, kLstm, model_->lstm_spec_)};

  parallel_for(total, [&](int64_t i) {
    Workspace& ws = *slots_[static_cast<size_t>(i)];
    if (!ws.grads.empty()) ws.grads.clear();
    const bool is_real = i < n_real;
    const Slate& slate = is_real
                             ? real_lists[static_cast<size_t>(i)]
                             : generated_lists[static_cast<size_t>(i - n_real)];
    ws.forward_backward(*model_, refs, *universe_, slate, is_real ? 1.0 : 0.0,
                        backward);
  });

  int64_t total_items = 0;
  double loss = 0.0;
  int correct = 0;
  for (int i = 0; i < total; ++i) {
    const Workspace& ws = *slots_[static_cast<size_t>(i)];
    const Slate& slate = i < n_real
                             ? real_lists[static_cast<size_t>(i)]
                             : generated_lists[static_cast<size_t>(i - n_real)];
    total_items += slate.size();
    loss += ws.loss;
    const bool said_real = ws.mean_prob > 0.5;
    if (said_real == (i < n_real)) ++correct;
  }
  loss /= static_cast<double>(total_items);
  if (accuracy) *accuracy = static_cast<double>(correct) / static_cast<double>(total);

  if (backward) {
    model_->params_.zero_grads();
    for (int i = 0; i < total; ++i)
      slots_[static_cast<size_t>(i)]->grads.add_to(
          model_->params_, 1.0 / static_cast<double>(total_items));
  }
  return loss;
}

DiscriminatorTrainer::StepStats DiscriminatorTrainer::step(
    const std::vector<Slate>& real_lists,
    const std::vector<Slate>& generated_lists) {
  StepStats stats;
  stats.loss = run(real_lists, generated_lists, true, &stats.accuracy);
  opt_.update(model_->params_);
  return stats;
}

double DiscriminatorTrainer::loss(const std::vector<Slate>& real_lists,
                                  const std::vector<Slate>& generated_lists,
                                  bool backward) {
  return run(real_lists, generated_lists, backward, nullptr);
}

// ---------------------------------------------------------------------------
// Distribution distance

double distribution_distance(const ItemUniverse& universe,
                             const std::vector<Slate>& a,
                             const std::vector<Slate>& b) {
  if (a.empty() || b.empty())
    throw DataError("distribution distance needs non-empty list sets");
  const int n = a.front().size();
  const int d = universe.feature_dim;
  const size_t dim = static_cast<size_t>(n) * static_cast<size_t>(d);

  auto embed = [&](const Slate& s, std::vector<double>& out) {
    if (s.size() != n)
      throw DataError("distribution distance needs equal list lengths (" +
                      std::to_string(s.size()) + " vs " + std::to_string(n) + ")");
    out.resize(dim);
    for (int i = 0; i < n; ++i) {
      auto x = universe.item(s.item_ids[static_cast<size_t>(i)]);
      std::copy(x.begin(), x.end(),
                out.begin() + static_cast<long>(i) * static_cast<long>(d));
    }
  };

  std::vector<std::vector<double>> ea(a.size());
  for (size_t i = 0; i < a.size(); ++i) embed(a[i], ea[i]);
  std::vector<double> cb(dim, 0.0);
  {
    std::vector<double> eb;
    for (const Slate& s : b) {
      embed(s, eb);
      for (size_t j = 0; j < dim; ++j) cb[j] += eb[j];
    }
    for (double& v : cb) v /= static_cast<double>(b.size());
  }

  std::vector<double> ca(dim, 0.0);
  for (const auto& e : ea)
    for (size_t j = 0; j < dim; ++j) ca[j] += e[j];
  for (double& v : ca) v /= static_cast<double>(ea.size());

  auto dist_to = [&](const std::vector<double>& e, const std::vector<double>& c) {
    double sq = 0.0;
    for (size_t j = 0; j < dim; ++j) {
      const double diff = e[j] - c[j];
      sq += diff * diff;
    }
    return std::sqrt(sq);
  };

  // Drop the fifth of A farthest from its own centroid (ties broken by
  // index so the trim is deterministic).
  std::vector<int> idx(ea.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> da(ea.size());
  for (size_t i = 0; i < ea.size(); ++i) da[i] = dist_to(ea[i], ca);
  std::sort(idx.begin(), idx.end(), [&](int x, int y) {
    if (da[static_cast<size_t>(x)] != da[static_cast<size_t>(y)])
      return da[static_cast<size_t>(x)] > da[static_cast<size_t>(y)];
    return x < y;
  });
  const size_t drop = ea.size() / 5;
  double sum = 0.0;
  for (size_t r = drop; r < idx.size(); ++r)
    sum += dist_to(ea[static_cast<size_t>(idx[r])], cb);
  return sum / static_cast<double>(idx.size() - drop);
}

// ---------------------------------------------------------------------------
// EG-Rerank+

EgRunResult train_eg_rerank_plus(const Evaluator& evaluator,
                                 const ItemUniverse& universe, Generator& model,
                                 Discriminator& disc, const Dataset& real_data,
                                 const EgTrainConfig& cfg, uint64_t seed,
                                 const RuleScorer* truth) {
  return eg_train_loop(evaluator, universe, model, &disc, &real_data, cfg, seed,
                       truth);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {
std::string discriminator_arch(const DiscriminatorConfig& cfg) {
  return "discriminator feature_dim " + std::to_string(cfg.feature_dim) +
         " bg_dim " + std::to_string(cfg.bg_dim) + " enc " +
         join_widths(cfg.enc_widths) + " hidden " + std::to_string(cfg.hidden) +
         " head " + join_widths(cfg.head_widths);
}
}  // namespace

void Discriminator::save(const std::string& path) const {
  write_checkpoint(path, checkpoint_of(params_, discriminator_arch(cfg_)));
}

Discriminator Discriminator::load(const std::string& path) {
  CheckpointDoc doc = read_checkpoint(path);
  std::istringstream is(doc.arch);
  std::string tag, key, s;
  DiscriminatorConfig cfg;
  is >> tag;
  if (tag != "discriminator")
    throw IoError("checkpoint '" + path + "' is not a discriminator (arch '" +
                  doc.arch + "')");
  while (is >> key) {
    if (key == "feature_dim") is >> cfg.feature_dim;
    else if (key == "bg_dim") is >> cfg.bg_dim;
    else if (key == "enc") { is >> s; cfg.enc_widths = parse_widths(s); }
    else if (key == "hidden") is >> cfg.hidden;
    else if (key == "head") { is >> s; cfg.head_widths = parse_widths(s); }
    else throw IoError("unknown discriminator arch key '" + key + "'");
  }
  Discriminator model(cfg, doc.seed);
  load_into(model.params_, doc);
  return model;
}

}  // namespace ranklab
