#include "ranklab/model/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>

#include "ranklab/core/adam.hpp"
#include "ranklab/core/checkpoint.hpp"
#include "ranklab/core/error.hpp"
#include "ranklab/core/ops.hpp"
#include "ranklab/core/parallel.hpp"
#include "ranklab/core/rng.hpp"
#include "ranklab/model/discriminator.hpp"

namespace ranklab {

namespace {

constexpr const char* kSenc = "senc";
constexpr const char* kAenc = "aenc";
constexpr const char* kHead = "head";
constexpr const char* kLstm = "lstm";

void check_config(const GeneratorConfig& cfg) {
  if (cfg.feature_dim <= 0 || cfg.bg_dim < 0)
    throw ConfigError("generator needs a positive feature_dim");
  if (cfg.senc_widths.empty() || cfg.aenc_widths.empty() ||
      cfg.head_widths.empty() || cfg.hidden <= 0)
    throw ConfigError("generator widths must be non-empty");
}

}  // namespace

Generator::Generator(GeneratorConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  check_config(cfg_);
  std::vector<int> senc_w{cfg_.feature_dim + cfg_.bg_dim};
  senc_w.insert(senc_w.end(), cfg_.senc_widths.begin(), cfg_.senc_widths.end());
  senc_spec_ = MlpSpec(senc_w, Act::relu, Act::relu);

  lstm_spec_ = LstmSpec{cfg_.senc_widths.back(), cfg_.hidden};

  std::vector<int> aenc_w{cfg_.feature_dim};
  aenc_w.insert(aenc_w.end(), cfg_.aenc_widths.begin(), cfg_.aenc_widths.end());
  aenc_spec_ = MlpSpec(aenc_w, Act::relu, Act::relu);

  std::vector<int> head_w{cfg_.aenc_widths.back() + cfg_.hidden};
  head_w.insert(head_w.end(), cfg_.head_widths.begin(), cfg_.head_widths.end());
  head_w.push_back(1);
  head_spec_ = MlpSpec(head_w, Act::relu, Act::none);

  params_ = ParameterSet(seed);
  Rng rng(mix_seed(seed, "generator"));
  mlp_init(params_, kSenc, senc_spec_, rng);
  lstm_init(params_, kLstm, lstm_spec_, rng);
  mlp_init(params_, kAenc, aenc_spec_, rng);
  mlp_init(params_, kHead, head_spec_, rng);
}

// ---------------------------------------------------------------------------
// Sampler

GeneratorSampler::GeneratorSampler(const Generator& model,
                                   const ItemUniverse& universe)
    : model_(&model), universe_(&universe) {
  senc_ref_ = mlp_ref(model.params_, kSenc, model.senc_spec_);
  aenc_ref_ = mlp_ref(model.params_, kAenc, model.aenc_spec_);
  head_ref_ = mlp_ref(model.params_, kHead, model.head_spec_);
  lstm_ref_ = lstm_ref(model.params_, kLstm, model.lstm_spec_);
}

void GeneratorSampler::begin(std::span<const int> candidate_ids,
                             std::span<const double> bg) {
  if (static_cast<int>(bg.size()) != model_->cfg_.bg_dim)
    throw ConfigError("bg width " + std::to_string(bg.size()) + ", expected " +
                      std::to_string(model_->cfg_.bg_dim));
  if (candidate_ids.empty())
    throw DataError("empty candidate set");
  const int n = static_cast<int>(candidate_ids.size());
  for (int i = 0; i < n; ++i) {
    const int id = candidate_ids[static_cast<size_t>(i)];
    if (id < 0 || id >= universe_->num_items)
      throw DataError("candidate id " + std::to_string(id) +
                      " outside universe of " +
                      std::to_string(universe_->num_items));
    for (int j = 0; j < i; ++j)
      if (candidate_ids[static_cast<size_t>(j)] == id)
        throw DataError("duplicate candidate id " + std::to_string(id));
  }
  ids_.assign(candidate_ids.begin(), candidate_ids.end());
  bg_.assign(bg.begin(), bg.end());

  const int a_width = model_->aenc_spec_.output_width();
  ha_.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& hai = ha_[static_cast<size_t>(i)];
    hai.resize(static_cast<size_t>(a_width));
    mlp_forward(model_->params_, aenc_ref_, universe_->item(ids_[static_cast<size_t>(i)]),
                hai, aenc_cache_);
  }
  in_.resize(static_cast<size_t>(model_->cfg_.feature_dim + model_->cfg_.bg_dim));
  u_.resize(static_cast<size_t>(model_->senc_spec_.output_width()));
  cat_.resize(static_cast<size_t>(a_width + model_->cfg_.hidden));
  logits_.resize(static_cast<size_t>(n));
}

GeneratorSampler::State GeneratorSampler::initial_state() const {
  State st;
  st.h.assign(static_cast<size_t>(model_->cfg_.hidden), 0.0);
  st.c.assign(static_cast<size_t>(model_->cfg_.hidden), 0.0);
  st.picked.assign(ids_.size(), 0);
  return st;
}

void GeneratorSampler::advance(State& st) {
  const int d = model_->cfg_.feature_dim;
  if (st.prev_slot < 0) {
    std::fill(in_.begin(), in_.begin() + d, 0.0);
  } else {
    auto x = universe_->item(ids_[static_cast<size_t>(st.prev_slot)]);
    std::copy(x.begin(), x.end(), in_.begin());
  }
  std::copy(bg_.begin(), bg_.end(), in_.begin() + d);
  mlp_forward(model_->params_, senc_ref_, in_, u_, senc_cache_);
  lstm_step(model_->params_, lstm_ref_, st.h, st.c, u_, st.h, st.c, lstm_cache_);
}

void GeneratorSampler::probs(const State& st, std::vector<double>& out) {
  const int n = num_candidates();
  out.assign(static_cast<size_t>(n), 0.0);
  const size_t a_width = ha_.empty() ? 0 : ha_[0].size();
  double max_logit = -std::numeric_limits<double>::infinity();
  int remaining = 0;
  for (int i = 0; i < n; ++i) {
    if (st.picked[static_cast<size_t>(i)]) continue;
    const auto& hai = ha_[static_cast<size_t>(i)];
    std::copy(hai.begin(), hai.end(), cat_.begin());
    std::copy(st.h.begin(), st.h.end(), cat_.begin() + static_cast<long>(a_width));
    double z = 0.0;
    mlp_forward(model_->params_, head_ref_, cat_, std::span<double>(&z, 1),
                head_cache_);
    logits_[static_cast<size_t>(i)] = z;
    max_logit = std::max(max_logit, z);
    ++remaining;
  }
  if (remaining == 0) throw DataError("no remaining candidates to rank");
  double denom = 0.0;
  for (int i = 0; i < n; ++i) {
    if (st.picked[static_cast<size_t>(i)]) continue;
    out[static_cast<size_t>(i)] = std::exp(logits_[static_cast<size_t>(i)] - max_logit);
    denom += out[static_cast<size_t>(i)];
  }
  for (int i = 0; i < n; ++i)
    if (!st.picked[static_cast<size_t>(i)]) out[static_cast<size_t>(i)] /= denom;
}

void GeneratorSampler::commit(State& st, int slot) {
  if (slot < 0 || slot >= num_candidates())
    throw DataError("slot " + std::to_string(slot) + " out of range");
  if (st.picked[static_cast<size_t>(slot)])
    throw DataError("slot " + std::to_string(slot) + " already picked");
  st.picked[static_cast<size_t>(slot)] = 1;
  st.prev_slot = slot;
  ++st.t;
}

// ---------------------------------------------------------------------------
// Episode runner: policy + evaluator (+ discriminator) advanced in lockstep.

namespace {

struct RunnerState {
  GeneratorSampler::State pol;
  EvaluatorScorer::State ev;
  DiscriminatorScorer::State di;
};

struct StepOut {
  int slot = -1;
  double logp = 0.0;
  double eval_p = 0.0;
  double reward = 0.0;
};

class EpisodeRunner {
 public:
  EpisodeRunner(const Generator& model, const Evaluator& evaluator,
                const ItemUniverse& universe, const Discriminator* disc,
                double beta)
      : pol_(model, universe), ev_(evaluator, universe), beta_(beta) {
    if (disc) di_.emplace(*disc, universe);
  }

  void begin(std::span<const int> ids, std::span<const double> bg) {
    pol_.begin(ids, bg);
    ev_.begin(ids, bg);
    if (di_) di_->begin(ids, bg);
    n_ = static_cast<int>(ids.size());
  }

  RunnerState initial() {
    RunnerState st;
    st.pol = pol_.initial_state();
    st.ev = ev_.initial_state();
    if (di_) st.di = di_->initial_state();
    return st;
  }

  StepOut step(RunnerState& st, RolloutMode mode, Rng* rng) {
    pol_.advance(st.pol);
    pol_.probs(st.pol, probs_);
    StepOut out;
    if (mode == RolloutMode::sample) {
      const double u = rng->uniform();
      double cum = 0.0;
      int last = -1;
      for (int i = 0; i < n_ && out.slot < 0; ++i) {
        if (st.pol.picked[static_cast<size_t>(i)]) continue;
        last = i;
        cum += probs_[static_cast<size_t>(i)];
        if (u < cum) out.slot = i;
      }
      if (out.slot < 0) out.slot = last;  // rounding guard
    } else {
      double best = -1.0;
      for (int i = 0; i < n_; ++i) {
        if (st.pol.picked[static_cast<size_t>(i)]) continue;
        if (probs_[static_cast<size_t>(i)] > best) {
          best = probs_[static_cast<size_t>(i)];
          out.slot = i;
        }
      }
    }
    out.logp = std::log(std::max(probs_[static_cast<size_t>(out.slot)], kProbEps));
    out.eval_p = ev_.step(st.ev, out.slot);
    out.reward = out.eval_p;
    if (di_) out.reward += beta_ * di_->step(st.di, out.slot);
    pol_.commit(st.pol, out.slot);
    return out;
  }

  // Replays a forced action (prefix reconstruction).
  void force(RunnerState& st, int slot) {
    pol_.advance(st.pol);
    ev_.step(st.ev, slot);
    if (di_) di_->step(st.di, slot);
    pol_.commit(st.pol, slot);
  }

  int size() const { return n_; }

 private:
  GeneratorSampler pol_;
  EvaluatorScorer ev_;
  std::optional<DiscriminatorScorer> di_;
  double beta_;
  int n_ = 0;
  std::vector<double> probs_;
};

void suffix_sums(const std::vector<double>& rewards, std::vector<double>& out) {
  out.assign(rewards.size(), 0.0);
  double acc = 0.0;
  for (size_t i = rewards.size(); i-- > 0;) {
    acc += rewards[i];
    out[i] = acc;
  }
}

}  // namespace

Trajectory rollout(const Generator& model, const Evaluator& evaluator,
                   const ItemUniverse& universe,
                   std::span<const int> candidate_ids,
                   std::span<const double> bg, RolloutMode mode, Rng& rng,
                   const Discriminator* disc, double beta) {
  EpisodeRunner runner(model, evaluator, universe, disc, beta);
  runner.begin(candidate_ids, bg);
  RunnerState st = runner.initial();
  Trajectory traj;
  traj.candidates.assign(candidate_ids.begin(), candidate_ids.end());
  traj.bg.assign(bg.begin(), bg.end());
  const int n = runner.size();
  for (int t = 0; t < n; ++t) {
    StepOut out = runner.step(st, mode, &rng);
    traj.slots.push_back(out.slot);
    traj.item_ids.push_back(traj.candidates[static_cast<size_t>(out.slot)]);
    traj.logp.push_back(out.logp);
    traj.eval_p.push_back(out.eval_p);
    traj.rewards.push_back(out.reward);
  }
  suffix_sums(traj.rewards, traj.returns);
  return traj;
}

std::vector<double> action_distribution(const Generator& model,
                                        const ItemUniverse& universe,
                                        std::span<const double> bg,
                                        std::span<const int> picked_prefix_slots,
                                        std::span<const int> candidate_ids) {
  if (picked_prefix_slots.size() >= candidate_ids.size())
    throw DataError("prefix of " + std::to_string(picked_prefix_slots.size()) +
                    " exhausts " + std::to_string(candidate_ids.size()) +
                    " candidates");
  GeneratorSampler sampler(model, universe);
  sampler.begin(candidate_ids, bg);
  GeneratorSampler::State st = sampler.initial_state();
  for (int slot : picked_prefix_slots) {
    sampler.advance(st);
    sampler.commit(st, slot);
  }
  sampler.advance(st);
  std::vector<double> probs;
  sampler.probs(st, probs);
  return probs;
}

ValueEstimate estimate_value(const Generator& model, const Evaluator& evaluator,
                             const ItemUniverse& universe,
                             std::span<const int> candidate_ids,
                             std::span<const double> bg,
                             std::span<const int> prefix_slots, int k,
                             double sigma_floor, Rng& rng,
                             const Discriminator* disc, double beta) {
  if (k <= 0) throw ConfigError("value estimation needs k > 0 rollouts");
  EpisodeRunner runner(model, evaluator, universe, disc, beta);
  runner.begin(candidate_ids, bg);
  RunnerState trunk = runner.initial();
  for (int slot : prefix_slots) runner.force(trunk, slot);

  const int remaining = runner.size() - static_cast<int>(prefix_slots.size());
  double sum = 0.0, sum_sq = 0.0;
  for (int j = 0; j < k; ++j) {
    RunnerState st = trunk;
    double total = 0.0;
    for (int t = 0; t < remaining; ++t) total += runner.step(st, RolloutMode::sample, &rng).reward;
    sum += total;
    sum_sq += total * total;
  }
  ValueEstimate est;
  est.value = sum / static_cast<double>(k);
  const double var = std::max(0.0, sum_sq / static_cast<double>(k) - est.value * est.value);
  est.sigma = std::max(std::sqrt(var), sigma_floor);
  return est;
}

// ---------------------------------------------------------------------------
// PPO update

namespace {

struct GenRefs {
  MlpRef senc, aenc, head;
  LstmRef lstm;
};

GenRefs resolve_refs(const Generator& model) {
  GenRefs r;
  const ParameterSet& ps = model.params();
  // Specs are private; rebuild them from the config the same way the
  // constructor does.
  const GeneratorConfig& cfg = model.config();
  std::vector<int> senc_w{cfg.feature_dim + cfg.bg_dim};
  senc_w.insert(senc_w.end(), cfg.senc_widths.begin(), cfg.senc_widths.end());
  r.senc = mlp_ref(ps, kSenc, MlpSpec(senc_w, Act::relu, Act::relu));
  std::vector<int> aenc_w{cfg.feature_dim};
  aenc_w.insert(aenc_w.end(), cfg.aenc_widths.begin(), cfg.aenc_widths.end());
  r.aenc = mlp_ref(ps, kAenc, MlpSpec(aenc_w, Act::relu, Act::relu));
  std::vector<int> head_w{cfg.aenc_widths.back() + cfg.hidden};
  head_w.insert(head_w.end(), cfg.head_widths.begin(), cfg.head_widths.end());
  head_w.push_back(1);
  r.head = mlp_ref(ps, kHead, MlpSpec(head_w, Act::relu, Act::none));
  r.lstm = lstm_ref(ps, kLstm, LstmSpec{cfg.senc_widths.back(), cfg.hidden});
  return r;
}

// Recompute-and-backprop workspace for one episode under the current
// parameters; one per minibatch slot so episodes run in parallel and the
// gradient reduction stays in slot order.
struct PpoWorkspace {
  std::vector<MlpCache> aenc_caches;
  std::vector<std::vector<double>> ha, dha;
  std::vector<MlpCache> senc_caches;
  std::vector<LstmCache> lstm_caches;
  std::vector<std::vector<double>> u, h_seq, c_seq;
  std::vector<std::vector<MlpCache>> head_caches;
  std::vector<std::vector<double>> probs;
  std::vector<double> dlp;
  std::vector<uint8_t> picked;
  std::vector<double> in, cat, dcat, dh, dc, dh_prev, dc_prev, du, h0, c0;
  GradBuffer grads;
};

// Returns the episode's summed negative clipped surrogate; gradients (if
// requested) accumulate into ws.grads unscaled.
double ppo_episode(const Generator& model, const GenRefs& refs,
                   const ItemUniverse& universe, const Trajectory& traj,
                   double clip, PpoWorkspace& ws, bool backward) {
  const int n = static_cast<int>(traj.candidates.size());
  const int steps = static_cast<int>(traj.slots.size());
  if (static_cast<int>(traj.logp.size()) != steps ||
      static_cast<int>(traj.advantage.size()) != steps)
    throw DataError("trajectory missing behavior log-probs or advantages");
  const ParameterSet& ps = model.params();
  const GeneratorConfig& cfg = model.config();
  const int d = cfg.feature_dim;
  const int hidden = cfg.hidden;
  const int a_width = refs.aenc.spec.output_width();
  const int u_width = refs.senc.spec.output_width();

  ws.aenc_caches.resize(static_cast<size_t>(n));
  ws.ha.resize(static_cast<size_t>(n));
  ws.dha.resize(static_cast<size_t>(n));
  ws.senc_caches.resize(static_cast<size_t>(steps));
  ws.lstm_caches.resize(static_cast<size_t>(steps));
  ws.u.resize(static_cast<size_t>(steps));
  ws.h_seq.resize(static_cast<size_t>(steps));
  ws.c_seq.resize(static_cast<size_t>(steps));
  ws.head_caches.resize(static_cast<size_t>(steps));
  ws.probs.resize(static_cast<size_t>(steps));
  ws.dlp.assign(static_cast<size_t>(steps), 0.0);
  ws.picked.assign(static_cast<size_t>(n), 0);
  ws.in.resize(static_cast<size_t>(d + cfg.bg_dim));
  ws.cat.resize(static_cast<size_t>(a_width + hidden));
  ws.dcat.resize(static_cast<size_t>(a_width + hidden));
  ws.dh.assign(static_cast<size_t>(hidden), 0.0);
  ws.dc.assign(static_cast<size_t>(hidden), 0.0);
  ws.dh_prev.resize(static_cast<size_t>(hidden));
  ws.dc_prev.resize(static_cast<size_t>(hidden));
  ws.du.resize(static_cast<size_t>(u_width));
  ws.h0.assign(static_cast<size_t>(hidden), 0.0);
  ws.c0.assign(static_cast<size_t>(hidden), 0.0);

  for (int i = 0; i < n; ++i) {
    ws.ha[static_cast<size_t>(i)].resize(static_cast<size_t>(a_width));
    mlp_forward(ps, refs.aenc, universe.item(traj.candidates[static_cast<size_t>(i)]),
                ws.ha[static_cast<size_t>(i)], ws.aenc_caches[static_cast<size_t>(i)]);
  }

  double loss = 0.0;
  for (int t = 0; t < steps; ++t) {
    if (t == 0) {
      std::fill(ws.in.begin(), ws.in.begin() + d, 0.0);
    } else {
      auto x = universe.item(traj.item_ids[static_cast<size_t>(t - 1)]);
      std::copy(x.begin(), x.end(), ws.in.begin());
    }
    std::copy(traj.bg.begin(), traj.bg.end(), ws.in.begin() + d);
    auto& ut = ws.u[static_cast<size_t>(t)];
    ut.resize(static_cast<size_t>(u_width));
    mlp_forward(ps, refs.senc, ws.in, ut, ws.senc_caches[static_cast<size_t>(t)]);

    const std::vector<double>& h_prev = t ? ws.h_seq[static_cast<size_t>(t - 1)] : ws.h0;
    const std::vector<double>& c_prev = t ? ws.c_seq[static_cast<size_t>(t - 1)] : ws.c0;
    auto& ht = ws.h_seq[static_cast<size_t>(t)];
    auto& ct = ws.c_seq[static_cast<size_t>(t)];
    ht.resize(static_cast<size_t>(hidden));
    ct.resize(static_cast<size_t>(hidden));
    lstm_step(ps, refs.lstm, h_prev, c_prev, ut, ht, ct,
              ws.lstm_caches[static_cast<size_t>(t)]);

    auto& caches_t = ws.head_caches[static_cast<size_t>(t)];
    caches_t.resize(static_cast<size_t>(n));
    auto& probs_t = ws.probs[static_cast<size_t>(t)];
    probs_t.assign(static_cast<size_t>(n), 0.0);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (ws.picked[static_cast<size_t>(i)]) continue;
      const auto& hai = ws.ha[static_cast<size_t>(i)];
      std::copy(hai.begin(), hai.end(), ws.cat.begin());
      std::copy(ht.begin(), ht.end(), ws.cat.begin() + a_width);
      double z = 0.0;
      mlp_forward(ps, refs.head, ws.cat, std::span<double>(&z, 1),
                  caches_t[static_cast<size_t>(i)]);
      probs_t[static_cast<size_t>(i)] = z;  // logits for now
      max_logit = std::max(max_logit, z);
    }
    double denom = 0.0;
    for (int i = 0; i < n; ++i) {
      if (ws.picked[static_cast<size_t>(i)]) continue;
      probs_t[static_cast<size_t>(i)] = std::exp(probs_t[static_cast<size_t>(i)] - max_logit);
      denom += probs_t[static_cast<size_t>(i)];
    }
    for (int i = 0; i < n; ++i)
      if (!ws.picked[static_cast<size_t>(i)]) probs_t[static_cast<size_t>(i)] /= denom;

    const int a = traj.slots[static_cast<size_t>(t)];
    if (a < 0 || a >= n || ws.picked[static_cast<size_t>(a)])
      throw DataError("trajectory action out of order at step " + std::to_string(t));
    const double lp = std::log(std::max(probs_t[static_cast<size_t>(a)], kProbEps));
    const double ratio = std::exp(lp - traj.logp[static_cast<size_t>(t)]);
    if (!std::isfinite(ratio))
      throw DivergenceError("ppo ratio diverged at step " + std::to_string(t));
    const double adv = traj.advantage[static_cast<size_t>(t)];
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
    loss -= std::min(unclipped, clipped);
    if (backward)
      ws.dlp[static_cast<size_t>(t)] = (unclipped <= clipped) ? -adv * ratio : 0.0;
    ws.picked[static_cast<size_t>(a)] = 1;
  }

  if (!backward) return loss;

  if (ps.version() != ws.lstm_caches[0].params_version) {
    // mlp_backward/lstm_backward verify per-cache; this is just the fast,
    // clearer failure for a stale whole-episode recompute.
    throw StaleCacheError("generator parameters changed mid-minibatch");
  }

  for (auto& v : ws.dha) v.assign(static_cast<size_t>(a_width), 0.0);
  std::fill(ws.dh.begin(), ws.dh.end(), 0.0);
  std::fill(ws.dc.begin(), ws.dc.end(), 0.0);
  for (int t = steps - 1; t >= 0; --t) {
    const int a = traj.slots[static_cast<size_t>(t)];
    ws.picked[static_cast<size_t>(a)] = 0;  // remaining set as of step t
    const double dlp = ws.dlp[static_cast<size_t>(t)];
    const auto& probs_t = ws.probs[static_cast<size_t>(t)];
    auto& caches_t = ws.head_caches[static_cast<size_t>(t)];
    if (dlp != 0.0) {
      for (int i = 0; i < n; ++i) {
        if (ws.picked[static_cast<size_t>(i)]) continue;
        double dlogit = dlp * ((i == a ? 1.0 : 0.0) - probs_t[static_cast<size_t>(i)]);
        mlp_backward(ps, refs.head, caches_t[static_cast<size_t>(i)],
                     std::span<const double>(&dlogit, 1), ws.dcat, ws.grads);
        auto& dhai = ws.dha[static_cast<size_t>(i)];
        for (int j = 0; j < a_width; ++j) dhai[static_cast<size_t>(j)] += ws.dcat[static_cast<size_t>(j)];
        for (int j = 0; j < hidden; ++j)
          ws.dh[static_cast<size_t>(j)] += ws.dcat[static_cast<size_t>(a_width + j)];
      }
    }
    lstm_backward(ps, refs.lstm, ws.lstm_caches[static_cast<size_t>(t)], ws.dh,
                  ws.dc, ws.dh_prev, ws.dc_prev, ws.du, ws.grads);
    mlp_backward(ps, refs.senc, ws.senc_caches[static_cast<size_t>(t)], ws.du,
                 std::span<double>(), ws.grads);
    std::swap(ws.dh, ws.dh_prev);
    std::swap(ws.dc, ws.dc_prev);
  }
  for (int i = 0; i < n; ++i)
    mlp_backward(ps, refs.aenc, ws.aenc_caches[static_cast<size_t>(i)],
                 ws.dha[static_cast<size_t>(i)], std::span<double>(), ws.grads);
  return loss;
}

}  // namespace

double ppo_surrogate_loss(Generator& model, const ItemUniverse& universe,
                          const std::vector<Trajectory>& batch, double clip,
                          bool backward) {
  if (batch.empty()) throw DataError("ppo update on an empty batch");
  GenRefs refs = resolve_refs(model);
  PpoWorkspace ws;
  ws.grads.reset(model.params());
  double loss = 0.0;
  int64_t total_steps = 0;
  for (const Trajectory& traj : batch) {
    loss += ppo_episode(model, refs, universe, traj, clip, ws, backward);
    total_steps += static_cast<int64_t>(traj.slots.size());
  }
  if (backward) {
    model.params().zero_grads();
    ws.grads.add_to(model.params(), 1.0 / static_cast<double>(total_steps));
  }
  return loss / static_cast<double>(total_steps);
}

// ---------------------------------------------------------------------------
// Training loop shared by EG-Rerank and EG-Rerank+

namespace {

// Per-episode trunk snapshots for branching value estimation.
struct EpisodeScratch {
  Trajectory traj;
  std::vector<RunnerState> snapshots;
  double true_score = 0.0;
};

Slate slate_of(const Trajectory& traj) {
  Slate s;
  s.item_ids = traj.item_ids;
  s.bg = traj.bg;
  return s;
}

}  // namespace

EgRunResult eg_train_loop(const Evaluator& evaluator,
                          const ItemUniverse& universe, Generator& model,
                          Discriminator* disc, const Dataset* real_data,
                          const EgTrainConfig& cfg, uint64_t seed,
                          const RuleScorer* truth) {
  if (cfg.iterations <= 0 || cfg.batch_episodes <= 0 ||
      cfg.minibatch_episodes <= 0 || cfg.epochs_per_batch <= 0 ||
      cfg.k_rollouts <= 0)
    throw ConfigError("eg training sizes must be positive");
  if (cfg.list_length <= 0 || cfg.list_length > universe.num_items)
    throw ConfigError("list_length " + std::to_string(cfg.list_length) +
                      " does not fit a universe of " +
                      std::to_string(universe.num_items) + " items");
  if (cfg.clip <= 0.0 || cfg.sigma_floor <= 0.0)
    throw ConfigError("clip and sigma_floor must be positive");
  if (disc && !real_data)
    throw ConfigError("discriminator co-training needs real lists");
  const double beta = disc ? cfg.beta : 0.0;

  if (disc && real_data->slates.empty())
    throw ConfigError("discriminator co-training needs a non-empty real pool");

  const uint64_t base = mix_seed(seed, "eg-rerank");
  // Episodes run under the fixed scenario context; the evaluator and
  // discriminator validate the width on begin().
  const std::vector<double> bg = constant_bg(model.config().bg_dim);

  Adam opt(model.params(), AdamConfig{model.config().learning_rate, 0.9, 0.999, 1e-8});
  std::optional<DiscriminatorTrainer> disc_trainer;
  if (disc)
    disc_trainer.emplace(*disc, universe, cfg.disc_learning_rate);

  // Fixed reference pool for the distribution-distance trace column.
  std::vector<Slate> dist_ref;
  if (disc && real_data) {
    Rng ref_rng(mix_seed(base, "dist-ref"));
    const int have = static_cast<int>(real_data->slates.size());
    const int want = std::min(cfg.distance_reference_lists, have);
    std::vector<int> pick = sample_distinct(have, want, ref_rng);
    dist_ref.reserve(static_cast<size_t>(want));
    for (int idx : pick) dist_ref.push_back(real_data->slates[static_cast<size_t>(idx)]);
  }

  EgRunResult result;
  result.trace.reserve(static_cast<size_t>(cfg.iterations));

  std::vector<EpisodeScratch> episodes(static_cast<size_t>(cfg.batch_episodes));
  std::vector<std::unique_ptr<PpoWorkspace>> slots;
  std::vector<Trajectory> minibatch;
  std::vector<int> order(static_cast<size_t>(cfg.batch_episodes));
  int disc_hot_streak = 0;

  for (int it = 0; it < cfg.iterations; ++it) {
    const uint64_t iter_seed = mix_seed(mix_seed(base, "iter"), static_cast<uint64_t>(it));

    // --- Collect one batch of episodes and their k-branch value estimates.
    parallel_for(static_cast<int64_t>(cfg.batch_episodes), [&](int64_t e) {
      EpisodeScratch& ep = episodes[static_cast<size_t>(e)];
      const uint64_t ep_seed = mix_seed(mix_seed(iter_seed, "episode"), static_cast<uint64_t>(e));
      Rng ep_rng(ep_seed);
      std::vector<int> cands = sample_distinct(universe.num_items, cfg.list_length, ep_rng);

      EpisodeRunner runner(model, evaluator, universe, disc, beta);
      runner.begin(cands, bg);
      Trajectory& traj = ep.traj;
      traj = Trajectory{};
      traj.candidates = std::move(cands);
      traj.bg = bg;
      ep.snapshots.assign(static_cast<size_t>(cfg.list_length), RunnerState{});

      RunnerState st = runner.initial();
      for (int t = 0; t < cfg.list_length; ++t) {
        ep.snapshots[static_cast<size_t>(t)] = st;
        StepOut out = runner.step(st, RolloutMode::sample, &ep_rng);
        traj.slots.push_back(out.slot);
        traj.item_ids.push_back(traj.candidates[static_cast<size_t>(out.slot)]);
        traj.logp.push_back(out.logp);
        traj.eval_p.push_back(out.eval_p);
        traj.rewards.push_back(out.reward);
      }
      suffix_sums(traj.rewards, traj.returns);

      traj.value.resize(static_cast<size_t>(cfg.list_length));
      traj.sigma.resize(static_cast<size_t>(cfg.list_length));
      traj.advantage.resize(static_cast<size_t>(cfg.list_length));
      const uint64_t val_seed = mix_seed(ep_seed, "value");
      for (int t = 0; t < cfg.list_length; ++t) {
        double sum = 0.0, sum_sq = 0.0;
        for (int j = 0; j < cfg.k_rollouts; ++j) {
          Rng branch_rng(mix_seed(val_seed, static_cast<uint64_t>(t * cfg.k_rollouts + j)));
          RunnerState bst = ep.snapshots[static_cast<size_t>(t)];
          double total = 0.0;
          for (int u = t; u < cfg.list_length; ++u)
            total += runner.step(bst, RolloutMode::sample, &branch_rng).reward;
          sum += total;
          sum_sq += total * total;
        }
        const double mean = sum / static_cast<double>(cfg.k_rollouts);
        const double var =
            std::max(0.0, sum_sq / static_cast<double>(cfg.k_rollouts) - mean * mean);
        const double sigma = std::max(std::sqrt(var), cfg.sigma_floor);
        traj.value[static_cast<size_t>(t)] = mean;
        traj.sigma[static_cast<size_t>(t)] = sigma;
        traj.advantage[static_cast<size_t>(t)] =
            (traj.returns[static_cast<size_t>(t)] - mean) / sigma;
      }
      ep.true_score = truth ? truth->true_score(traj.item_ids) : std::numeric_limits<double>::quiet_NaN();
    });

    // --- Trace statistics from the freshly collected batch.
    EgTraceRow row;
    row.iteration = it;
    double sum_shaped = 0.0, sum_eval = 0.0, sum_true = 0.0;
    for (const EpisodeScratch& ep : episodes) {
      sum_shaped += ep.traj.returns.empty() ? 0.0 : ep.traj.returns[0];
      sum_eval += ep.traj.evaluator_score();
      sum_true += ep.true_score;
    }
    const double n_eps = static_cast<double>(cfg.batch_episodes);
    row.mean_shaped_return = sum_shaped / n_eps;
    row.mean_evaluator_score = sum_eval / n_eps;
    row.mean_true_score = truth ? sum_true / n_eps : std::numeric_limits<double>::quiet_NaN();
    row.discriminator_accuracy = std::numeric_limits<double>::quiet_NaN();
    row.distribution_distance = std::numeric_limits<double>::quiet_NaN();

    // --- One discriminator step per generator batch (EG-Rerank+).
    if (disc) {
      std::vector<Slate> generated;
      generated.reserve(episodes.size());
      for (const EpisodeScratch& ep : episodes) generated.push_back(slate_of(ep.traj));

      Rng real_rng(mix_seed(iter_seed, "disc-real"));
      const int have = static_cast<int>(real_data->slates.size());
      const int want = std::min(cfg.disc_minibatch_lists, have);
      std::vector<int> pick = sample_distinct(have, want, real_rng);
      std::vector<Slate> real_batch;
      real_batch.reserve(static_cast<size_t>(want));
      for (int idx : pick) real_batch.push_back(real_data->slates[static_cast<size_t>(idx)]);

      DiscriminatorTrainer::StepStats stats = disc_trainer->step(real_batch, generated);
      row.discriminator_accuracy = stats.accuracy;
      row.distribution_distance = distribution_distance(universe, generated, dist_ref);
      if (stats.accuracy >= 1.0) {
        if (++disc_hot_streak >= 5) ++result.warnings_imbalance;
      } else {
        disc_hot_streak = 0;
      }
    }

    // --- PPO epochs over seeded-shuffled minibatches.
    GenRefs refs = resolve_refs(model);
    const int n_slots = std::min(cfg.minibatch_episodes, cfg.batch_episodes);
    while (static_cast<int>(slots.size()) < n_slots)
      slots.push_back(std::make_unique<PpoWorkspace>());
    for (int epoch = 0; epoch < cfg.epochs_per_batch; ++epoch) {
      for (int e = 0; e < cfg.batch_episodes; ++e) order[static_cast<size_t>(e)] = e;
      Rng shuffle_rng(mix_seed(mix_seed(iter_seed, "ppo"), static_cast<uint64_t>(epoch)));
      shuffle(order, shuffle_rng);
      for (int start = 0; start < cfg.batch_episodes; start += cfg.minibatch_episodes) {
        const int count = std::min(cfg.minibatch_episodes, cfg.batch_episodes - start);
        int64_t total_steps = 0;
        for (int b = 0; b < count; ++b)
          total_steps += static_cast<int64_t>(
              episodes[static_cast<size_t>(order[static_cast<size_t>(start + b)])].traj.slots.size());
        parallel_for(count, [&](int64_t b) {
          PpoWorkspace& ws = *slots[static_cast<size_t>(b)];
          if (ws.grads.empty()) ws.grads.reset(model.params());
          ws.grads.clear();
          const Trajectory& traj =
              episodes[static_cast<size_t>(order[static_cast<size_t>(start + b)])].traj;
          ppo_episode(model, refs, universe, traj, cfg.clip, ws, true);
        });
        model.params().zero_grads();
        for (int b = 0; b < count; ++b)
          slots[static_cast<size_t>(b)]->grads.add_to(
              model.params(), 1.0 / static_cast<double>(total_steps));
        opt.update(model.params());
      }
    }

    result.trace.push_back(row);
  }
  return result;
}

EgRunResult train_eg_rerank(const Evaluator& evaluator,
                            const ItemUniverse& universe, Generator& model,
                            const EgTrainConfig& cfg, uint64_t seed,
                            const RuleScorer* truth) {
  return eg_train_loop(evaluator, universe, model, nullptr, nullptr, cfg, seed, truth);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {
std::string generator_arch(const GeneratorConfig& cfg) {
  return "generator feature_dim " + std::to_string(cfg.feature_dim) +
         " bg_dim " + std::to_string(cfg.bg_dim) + " senc " +
         join_widths(cfg.senc_widths) + " aenc " + join_widths(cfg.aenc_widths) +
         " hidden " + std::to_string(cfg.hidden) + " head " +
         join_widths(cfg.head_widths);
}
}  // namespace

void Generator::save(const std::string& path) const {
  write_checkpoint(path, checkpoint_of(params_, generator_arch(cfg_)));
}

Generator Generator::load(const std::string& path) {
  CheckpointDoc doc = read_checkpoint(path);
  std::istringstream is(doc.arch);
  std::string tag, key, s;
  GeneratorConfig cfg;
  is >> tag;
  if (tag != "generator")
    throw IoError("checkpoint '" + path + "' is not a generator (arch '" +
                  doc.arch + "')");
  while (is >> key) {
    if (key == "feature_dim") is >> cfg.feature_dim;
    else if (key == "bg_dim") is >> cfg.bg_dim;
    else if (key == "senc") { is >> s; cfg.senc_widths = parse_widths(s); }
    else if (key == "aenc") { is >> s; cfg.aenc_widths = parse_widths(s); }
    else if (key == "hidden") is >> cfg.hidden;
    else if (key == "head") { is >> s; cfg.head_widths = parse_widths(s); }
    else throw IoError("unknown generator arch key '" + key + "'");
  }
  Generator model(cfg, doc.seed);
  load_into(model.params_, doc);
  return model;
}

}  // namespace ranklab
