#include <doctest.h>

#include <cmath>
#include <vector>

#include "ranklab/core/error.hpp"
#include "ranklab/core/gradcheck.hpp"
#include "ranklab/core/lstm.hpp"
#include "ranklab/core/mlp.hpp"
#include "ranklab/core/ops.hpp"
#include "ranklab/core/rng.hpp"

using namespace ranklab;

namespace {

// Textbook forward pass written independently of the library kernels.
std::vector<double> naive_mlp(const ParameterSet& ps, const std::string& prefix,
                              const MlpSpec& spec, const std::vector<double>& in) {
  std::vector<double> x = in;
  for (int l = 0; l < spec.layers(); ++l) {
    auto W = ps.value(prefix + "/W" + std::to_string(l));
    auto b = ps.value(prefix + "/b" + std::to_string(l));
    int rows = spec.widths[static_cast<size_t>(l) + 1];
    int cols = spec.widths[static_cast<size_t>(l)];
    std::vector<double> y(static_cast<size_t>(rows));
    for (int r = 0; r < rows; ++r) {
      double s = b[r];
      for (int c = 0; c < cols; ++c)
        s += W[r * cols + c] * x[static_cast<size_t>(c)];
      Act a = (l + 1 == spec.layers()) ? spec.output : spec.hidden;
      y[static_cast<size_t>(r)] = apply_act(a, s);
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

TEST_CASE("mlp registers parameters and initializes deterministically") {
  MlpSpec spec({2, 3, 1}, Act::relu, Act::none);
  ParameterSet p1, p2;
  Rng r1(7), r2(7);
  mlp_init(p1, "net", spec, r1);
  mlp_init(p2, "net", spec, r2);
  CHECK(p1.has("net/W0"));
  CHECK(p1.has("net/b0"));
  CHECK(p1.has("net/W1"));
  CHECK(p1.has("net/b1"));
  CHECK(p1.num_scalars() == 2 * 3 + 3 + 3 * 1 + 1);
  for (int64_t i = 0; i < p1.num_scalars(); ++i)
    CHECK(p1.flat_values()[static_cast<size_t>(i)] ==
          p2.flat_values()[static_cast<size_t>(i)]);
  // biases start at zero
  CHECK(p1.value("net/b0")[0] == 0.0);
  CHECK(p1.value("net/b1")[0] == 0.0);
}

TEST_CASE("mlp forward matches a naive reimplementation") {
  MlpSpec spec({3, 5, 2}, Act::tanh, Act::sigmoid);
  ParameterSet ps;
  Rng rng(21);
  mlp_init(ps, "m", spec, rng);
  // nonzero biases so the bias path is exercised
  for (double& v : ps.mutable_value("m/b0")) v = 0.1;
  for (double& v : ps.mutable_value("m/b1")) v = -0.2;

  std::vector<double> in{0.3, -1.1, 0.7};
  std::vector<double> expect = naive_mlp(ps, "m", spec, in);

  MlpRef ref = mlp_ref(ps, "m", spec);
  MlpCache cache;
  std::vector<double> out(2);
  mlp_forward(ps, ref, in, out, cache);
  for (int i = 0; i < 2; ++i)
    CHECK(out[static_cast<size_t>(i)] ==
          doctest::Approx(expect[static_cast<size_t>(i)]).epsilon(1e-13));

  std::vector<double> conv = mlp_forward(ps, "m", spec, in);
  CHECK(conv == out);
}

TEST_CASE("mlp backward passes a finite-difference check") {
  MlpSpec spec({4, 6, 3}, Act::tanh, Act::none);
  ParameterSet ps;
  Rng rng(31);
  mlp_init(ps, "m", spec, rng);
  MlpRef ref = mlp_ref(ps, "m", spec);

  std::vector<double> in{0.5, -0.4, 1.2, -0.9};
  auto loss_value = [&]() {
    MlpCache c;
    std::vector<double> out(3);
    mlp_forward(ps, ref, in, out, c);
    double s = 0.0;
    for (double v : out) s += 0.5 * v * v;
    return s;
  };

  MlpCache cache;
  std::vector<double> out(3);
  mlp_forward(ps, ref, in, out, cache);
  GradBuffer gb(ps);
  std::vector<double> dinput(4);
  mlp_backward(ps, ref, cache, out, dinput, gb);  // dL/dout = out
  ps.zero_grads();
  gb.add_to(ps);

  GradCheckResult res = grad_check(loss_value, ps, 1e-5, 0, 5);
  CHECK(res.coords_checked == static_cast<int>(ps.num_scalars()));
  CHECK(res.max_rel_error < 1e-7);

  // input gradient against central differences
  for (int k = 0; k < 4; ++k) {
    double h = 1e-6;
    double saved = in[static_cast<size_t>(k)];
    in[static_cast<size_t>(k)] = saved + h;
    double fp = loss_value();
    in[static_cast<size_t>(k)] = saved - h;
    double fm = loss_value();
    in[static_cast<size_t>(k)] = saved;
    CHECK(dinput[static_cast<size_t>(k)] ==
          doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("mlp backward rejects a stale cache") {
  MlpSpec spec({2, 2}, Act::none);
  ParameterSet ps;
  Rng rng(1);
  mlp_init(ps, "m", spec, rng);
  MlpRef ref = mlp_ref(ps, "m", spec);
  MlpCache cache;
  std::vector<double> in{1.0, 2.0}, out(2);
  mlp_forward(ps, ref, in, out, cache);
  ps.mutable_value("m/W0")[0] += 0.5;  // invalidates the cache
  GradBuffer gb(ps);
  std::vector<double> dout{1.0, 0.0};
  CHECK_THROWS_AS(mlp_backward(ps, ref, cache, dout, {}, gb), StaleCacheError);
}

TEST_CASE("mlp_ref validates presence of every layer tensor") {
  ParameterSet ps;
  MlpSpec spec({2, 2}, Act::none);
  CHECK_THROWS_AS(mlp_ref(ps, "missing", spec), ConfigError);
}

namespace {

// Gate order i, f, g, o; z = W [x; h_prev] + b.
void naive_lstm_step(const ParameterSet& ps, const std::string& prefix,
                     const LstmSpec& spec, const std::vector<double>& h_prev,
                     const std::vector<double>& c_prev,
                     const std::vector<double>& x, std::vector<double>& h_out,
                     std::vector<double>& c_out) {
  const int H = spec.hidden, X = spec.input;
  auto W = ps.value(prefix + "/W");
  auto b = ps.value(prefix + "/b");
  std::vector<double> xh(static_cast<size_t>(X + H));
  for (int i = 0; i < X; ++i) xh[static_cast<size_t>(i)] = x[static_cast<size_t>(i)];
  for (int i = 0; i < H; ++i) xh[static_cast<size_t>(X + i)] = h_prev[static_cast<size_t>(i)];
  auto zrow = [&](int r) {
    double s = b[r];
    for (int c = 0; c < X + H; ++c) s += W[r * (X + H) + c] * xh[static_cast<size_t>(c)];
    return s;
  };
  h_out.resize(static_cast<size_t>(H));
  c_out.resize(static_cast<size_t>(H));
  for (int j = 0; j < H; ++j) {
    double zi = zrow(j), zf = zrow(H + j), zg = zrow(2 * H + j), zo = zrow(3 * H + j);
    double i_g = 1.0 / (1.0 + std::exp(-zi));
    double f_g = 1.0 / (1.0 + std::exp(-zf));
    double g_g = std::tanh(zg);
    double o_g = 1.0 / (1.0 + std::exp(-zo));
    double c = f_g * c_prev[static_cast<size_t>(j)] + i_g * g_g;
    c_out[static_cast<size_t>(j)] = c;
    h_out[static_cast<size_t>(j)] = o_g * std::tanh(c);
  }
}

}  // namespace

TEST_CASE("lstm step matches a naive gate-by-gate computation") {
  LstmSpec spec{3, 4};
  ParameterSet ps;
  Rng rng(11);
  lstm_init(ps, "cell", spec, rng);
  // nonzero bias so all four gate slices matter
  {
    auto b = ps.mutable_value("cell/b");
    for (size_t i = 0; i < b.size(); ++i) b[i] = 0.05 * static_cast<double>(i % 7) - 0.1;
  }
  LstmRef ref = lstm_ref(ps, "cell", spec);

  std::vector<double> h(4, 0.0), c(4, 0.0), x{0.4, -0.6, 1.1};
  // seed the state with something nonzero first
  for (int i = 0; i < 4; ++i) {
    h[static_cast<size_t>(i)] = 0.1 * (i + 1);
    c[static_cast<size_t>(i)] = -0.2 * (i + 1);
  }
  std::vector<double> h_ref, c_ref;
  naive_lstm_step(ps, "cell", spec, h, c, x, h_ref, c_ref);

  std::vector<double> h_out(4), c_out(4);
  LstmCache cache;
  lstm_step(ps, ref, h, c, x, h_out, c_out, cache);
  for (int i = 0; i < 4; ++i) {
    CHECK(h_out[static_cast<size_t>(i)] ==
          doctest::Approx(h_ref[static_cast<size_t>(i)]).epsilon(1e-12));
    CHECK(c_out[static_cast<size_t>(i)] ==
          doctest::Approx(c_ref[static_cast<size_t>(i)]).epsilon(1e-12));
  }

  // aliased in-place update gives identical results
  std::vector<double> h2 = h, c2 = c;
  LstmCache cache2;
  lstm_step(ps, ref, h2, c2, x, h2, c2, cache2);
  CHECK(h2 == h_out);
  CHECK(c2 == c_out);
}

TEST_CASE("lstm backward through a short sequence passes gradcheck") {
  LstmSpec spec{2, 3};
  ParameterSet ps;
  Rng rng(17);
  lstm_init(ps, "cell", spec, rng);
  LstmRef ref = lstm_ref(ps, "cell", spec);

  std::vector<std::vector<double>> xs{{0.3, -0.5}, {1.0, 0.2}, {-0.7, 0.9}};
  auto loss_value = [&]() {
    std::vector<double> h(3, 0.0), c(3, 0.0);
    std::vector<LstmCache> caches(xs.size());
    for (size_t t = 0; t < xs.size(); ++t)
      lstm_step(ps, ref, h, c, xs[t], h, c, caches[t]);
    double s = 0.0;
    for (double v : h) s += v;
    return s;
  };

  std::vector<double> h(3, 0.0), c(3, 0.0);
  std::vector<LstmCache> caches(xs.size());
  for (size_t t = 0; t < xs.size(); ++t)
    lstm_step(ps, ref, h, c, xs[t], h, c, caches[t]);

  GradBuffer gb(ps);
  std::vector<double> dh(3, 1.0), dc(3, 0.0), dh_prev(3), dc_prev(3);
  for (size_t t = xs.size(); t-- > 0;) {
    std::vector<double> dx(2);
    lstm_backward(ps, ref, caches[t], dh, dc, dh_prev, dc_prev, dx, gb);
    dh = dh_prev;
    dc = dc_prev;
  }
  ps.zero_grads();
  gb.add_to(ps);

  GradCheckResult res = grad_check(loss_value, ps, 1e-5, 0, 3);
  CHECK(res.max_rel_error < 1e-7);
}

TEST_CASE("lstm backward rejects a stale cache") {
  LstmSpec spec{2, 2};
  ParameterSet ps;
  Rng rng(5);
  lstm_init(ps, "cell", spec, rng);
  LstmRef ref = lstm_ref(ps, "cell", spec);
  std::vector<double> h(2, 0.0), c(2, 0.0), x{1.0, -1.0};
  LstmCache cache;
  lstm_step(ps, ref, h, c, x, h, c, cache);
  ps.mutable_value("cell/W")[0] += 0.1;
  GradBuffer gb(ps);
  std::vector<double> dh{1.0, 1.0}, dc{0.0, 0.0}, dhp(2), dcp(2), dx(2);
  CHECK_THROWS_AS(lstm_backward(ps, ref, cache, dh, dc, dhp, dcp, dx, gb),
                  StaleCacheError);
}
