#include "ranklab/core/lstm.hpp"

#include <cmath>

#include "ranklab/core/error.hpp"
#include "ranklab/core/kernels.hpp"
#include "ranklab/core/ops.hpp"
#include "ranklab/core/rng.hpp"

namespace ranklab {

namespace {

void check_spec(const LstmSpec& spec) {
  if (spec.input <= 0 || spec.hidden <= 0)
    throw ConfigError("lstm input and hidden widths must be positive");
}

}  // namespace

void lstm_init(ParameterSet& ps, const std::string& prefix, const LstmSpec& spec,
               Rng& rng) {
  check_spec(spec);
  int cols = spec.input + spec.hidden;
  ps.add(prefix + "/W", {4 * spec.hidden, cols});
  ps.add(prefix + "/b", {4 * spec.hidden});
  init_uniform_fan_in(ps, prefix + "/W", cols, rng);
  // biases stay zero (including the forget gate: sequences here are short)
}

LstmRef lstm_ref(const ParameterSet& ps, const std::string& prefix,
                 const LstmSpec& spec) {
  check_spec(spec);
  return LstmRef{spec, ps.find(prefix + "/W"), ps.find(prefix + "/b")};
}

void lstm_step(const ParameterSet& ps, const LstmRef& ref,
               std::span<const double> h_prev, std::span<const double> c_prev,
               std::span<const double> x, std::span<double> h_out,
               std::span<double> c_out, LstmCache& cache) {
  const int H = ref.spec.hidden;
  const int X = ref.spec.input;
  if (static_cast<int>(x.size()) != X)
    throw ConfigError("lstm input width " + std::to_string(x.size()) +
                      ", expected " + std::to_string(X));
  if (static_cast<int>(h_prev.size()) != H || static_cast<int>(c_prev.size()) != H ||
      static_cast<int>(h_out.size()) != H || static_cast<int>(c_out.size()) != H)
    throw ConfigError("lstm state width mismatch");

  cache.xh.resize(static_cast<size_t>(X + H));
  std::copy(x.begin(), x.end(), cache.xh.begin());
  std::copy(h_prev.begin(), h_prev.end(), cache.xh.begin() + X);
  cache.c_prev.assign(c_prev.begin(), c_prev.end());

  // z = W [x;h] + b, gates in i,f,g,o blocks
  std::vector<double>& zi = cache.i;
  zi.resize(static_cast<size_t>(4 * H));
  matvec(ps.value(ref.w_idx).data(), cache.xh.data(), ps.value(ref.b_idx).data(),
         zi.data(), 4 * H, X + H);

  cache.f.resize(static_cast<size_t>(H));
  cache.g.resize(static_cast<size_t>(H));
  cache.o.resize(static_cast<size_t>(H));
  cache.c.resize(static_cast<size_t>(H));
  cache.tanh_c.resize(static_cast<size_t>(H));
  for (int j = 0; j < H; ++j) {
    double vi = sigmoid(zi[static_cast<size_t>(j)]);
    double vf = sigmoid(zi[static_cast<size_t>(H + j)]);
    double vg = std::tanh(zi[static_cast<size_t>(2 * H + j)]);
    double vo = sigmoid(zi[static_cast<size_t>(3 * H + j)]);
    double c = vf * cache.c_prev[static_cast<size_t>(j)] + vi * vg;
    double tc = std::tanh(c);
    cache.f[static_cast<size_t>(j)] = vf;
    cache.g[static_cast<size_t>(j)] = vg;
    cache.o[static_cast<size_t>(j)] = vo;
    cache.c[static_cast<size_t>(j)] = c;
    cache.tanh_c[static_cast<size_t>(j)] = tc;
    c_out[j] = c;
    h_out[j] = vo * tc;  // |h| < 1 since vo < 1 and |tanh| < 1
    zi[static_cast<size_t>(j)] = vi;  // reuse the z buffer to store i
  }
  cache.i.resize(static_cast<size_t>(H));
  cache.params_version = ps.version();
}

void lstm_backward(const ParameterSet& ps, const LstmRef& ref,
                   const LstmCache& cache, std::span<const double> dh,
                   std::span<const double> dc, std::span<double> dh_prev,
                   std::span<double> dc_prev, std::span<double> dx,
                   GradBuffer& gb) {
  const int H = ref.spec.hidden;
  const int X = ref.spec.input;
  if (cache.params_version != ps.version())
    throw StaleCacheError("lstm backward given a cache from parameter version " +
                          std::to_string(cache.params_version) + ", now at " +
                          std::to_string(ps.version()));

  std::vector<double>& dz = cache.dz_scratch;
  dz.assign(static_cast<size_t>(4 * H), 0.0);
  for (int j = 0; j < H; ++j) {
    double i = cache.i[static_cast<size_t>(j)];
    double f = cache.f[static_cast<size_t>(j)];
    double g = cache.g[static_cast<size_t>(j)];
    double o = cache.o[static_cast<size_t>(j)];
    double tc = cache.tanh_c[static_cast<size_t>(j)];
    double dht = dh[j];
    double dct = dc[j] + dht * o * (1.0 - tc * tc);
    dc_prev[j] = dct * f;
    double di = dct * g;
    double df = dct * cache.c_prev[static_cast<size_t>(j)];
    double dg = dct * i;
    double do_ = dht * tc;
    dz[static_cast<size_t>(j)] = di * i * (1.0 - i);
    dz[static_cast<size_t>(H + j)] = df * f * (1.0 - f);
    dz[static_cast<size_t>(2 * H + j)] = dg * (1.0 - g * g);
    dz[static_cast<size_t>(3 * H + j)] = do_ * o * (1.0 - o);
  }

  ger_acc(gb.of(ps, ref.w_idx).data(), gb.of(ps, ref.b_idx).data(), dz.data(),
          cache.xh.data(), 4 * H, X + H);

  std::vector<double>& dxh = cache.dxh_scratch;
  dxh.assign(static_cast<size_t>(X + H), 0.0);
  matvec_t_acc(ps.value(ref.w_idx).data(), dz.data(), dxh.data(), 4 * H, X + H);
  if (!dx.empty()) {
    if (static_cast<int>(dx.size()) != X)
      throw ConfigError("lstm dx span has the wrong width");
    std::copy(dxh.begin(), dxh.begin() + X, dx.begin());
  }
  std::copy(dxh.begin() + X, dxh.end(), dh_prev.begin());
}

}  // namespace ranklab
