#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "ranklab/core/adam.hpp"
#include "ranklab/core/checkpoint.hpp"
#include "ranklab/core/error.hpp"
#include "ranklab/core/kernels.hpp"
#include "ranklab/core/ops.hpp"
#include "ranklab/core/parallel.hpp"
#include "ranklab/core/params.hpp"
#include "ranklab/core/rng.hpp"
#include "ranklab/core/tensor.hpp"

using namespace ranklab;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("tensor shapes and accessors") {
  Tensor t = Tensor::zeros({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  t.at(1, 2) = 5.0;
  CHECK(t.at(1, 2) == 5.0);
  CHECK(t.row(1)[2] == 5.0);
  CHECK(t.all_finite());
  t.at(0, 0) = std::nan("");
  CHECK_FALSE(t.all_finite());

  Tensor s = Tensor::scalar(3.5);
  CHECK(s.rank() == 0);
  CHECK(s.numel() == 1);
  CHECK(s.data[0] == 3.5);
  CHECK(shape_numel({}) == 1);
  CHECK(shape_numel({4, 5}) == 20);
}

TEST_CASE("parameter set registration and versioning") {
  ParameterSet ps(123);
  int a = ps.add("w", {2, 2});
  int b = ps.add("b", {2});
  CHECK(ps.count() == 2);
  CHECK(ps.num_scalars() == 6);
  CHECK(ps.has("w"));
  CHECK_FALSE(ps.has("zzz"));
  CHECK(ps.find("b") == b);
  CHECK_THROWS_AS(ps.find("zzz"), ConfigError);
  CHECK_THROWS_AS(ps.add("w", {1}), ConfigError);

  uint64_t v0 = ps.version();
  (void)ps.value(a);          // reads do not bump the version
  CHECK(ps.version() == v0);
  ps.mutable_value(a)[0] = 1.0;
  CHECK(ps.version() > v0);

  // entry layout: offsets partition the flat storage in registration order
  CHECK(ps.info(a).offset == 0);
  CHECK(ps.info(b).offset == 4);
  CHECK(ps.flat_values()[0] == 1.0);

  ps.grad(a)[1] = 7.0;
  ps.zero_grads();
  CHECK(ps.grad(a)[1] == 0.0);

  Tensor snap = ps.value_tensor(a);
  CHECK(snap.shape == std::vector<int>{2, 2});
  CHECK(snap.data[0] == 1.0);
  snap.data[3] = -2.0;
  ps.set_value("w", snap);
  CHECK(ps.value("w")[3] == -2.0);
  CHECK(ps.rng_seed() == 123);
}

TEST_CASE("fan-in uniform init is bounded and deterministic") {
  ParameterSet p1, p2;
  p1.add("w", {8, 16});
  p2.add("w", {8, 16});
  Rng r1(42), r2(42);
  init_uniform_fan_in(p1, "w", 16, r1);
  init_uniform_fan_in(p2, "w", 16, r2);
  double bound = 1.0 / std::sqrt(16.0);
  bool any_nonzero = false;
  for (size_t i = 0; i < 8 * 16; ++i) {
    double v = p1.flat_values()[i];
    CHECK(v == p2.flat_values()[i]);
    CHECK(std::fabs(v) <= bound);
    if (v != 0.0) any_nonzero = true;
  }
  CHECK(any_nonzero);
}

TEST_CASE("grad buffer accumulation and scaled reduction") {
  ParameterSet ps;
  int a = ps.add("w", {3});
  GradBuffer gb(ps);
  CHECK_FALSE(gb.empty());
  auto sp = gb.of(ps, a);
  sp[0] = 1.0;
  sp[2] = 2.0;
  gb.add_to(ps, 0.5);
  CHECK(ps.grad(a)[0] == 0.5);
  CHECK(ps.grad(a)[1] == 0.0);
  CHECK(ps.grad(a)[2] == 1.0);
  gb.clear();
  CHECK(gb.flat()[0] == 0.0);
}

TEST_CASE("adam first step matches the bias-corrected closed form") {
  ParameterSet ps;
  ps.add("w", {3});
  ps.mutable_value("w")[0] = 1.0;
  ps.mutable_value("w")[1] = -1.0;
  ps.mutable_value("w")[2] = 0.5;
  AdamConfig cfg;
  cfg.lr = 0.01;
  Adam opt(ps, cfg);

  std::vector<double> g{0.3, -0.7, 2.0};
  for (int i = 0; i < 3; ++i) ps.grad("w")[i] = g[static_cast<size_t>(i)];
  std::vector<double> before(ps.flat_values().begin(), ps.flat_values().end());
  opt.update(ps);
  CHECK(opt.step() == 1);
  for (int i = 0; i < 3; ++i) {
    // m_hat = g, v_hat = g^2 after one step, so delta = lr * g / (|g| + eps)
    double expect = before[static_cast<size_t>(i)] -
                    cfg.lr * g[static_cast<size_t>(i)] /
                        (std::fabs(g[static_cast<size_t>(i)]) + cfg.eps);
    CHECK(ps.value("w")[i] == doctest::Approx(expect).epsilon(1e-12));
  }

  ps.grad("w")[0] = std::nan("");
  CHECK_THROWS_AS(opt.update(ps), DivergenceError);
}

TEST_CASE("checkpoint round-trips doubles exactly") {
  CheckpointDoc doc;
  doc.arch = "test arch line";
  doc.seed = 9876543210123ull;
  Tensor t({2, 2}, {0.1, -1.0 / 3.0, 1e300, 5e-324});
  doc.tensors.emplace_back("w", t);
  doc.tensors.emplace_back("b", Tensor({1}, {-0.0}));

  std::string path = temp_path("ranklab_ckpt_test.txt");
  write_checkpoint(path, doc);
  CheckpointDoc back = read_checkpoint(path);
  CHECK(back.arch == doc.arch);
  CHECK(back.seed == doc.seed);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.has_tensor("w"));
  CHECK_FALSE(back.has_tensor("zzz"));
  const Tensor& w = back.tensor("w");
  CHECK(w.shape == t.shape);
  for (size_t i = 0; i < t.data.size(); ++i) {
    // bit-exact round trip, including the subnormal
    CHECK(std::memcmp(&w.data[i], &t.data[i], sizeof(double)) == 0);
  }
  CHECK_THROWS_AS(read_checkpoint(temp_path("ranklab_no_such_ckpt.txt")), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint load_into validates names and shapes") {
  ParameterSet ps;
  ps.add("w", {2});
  ps.mutable_value("w")[0] = 4.0;
  CheckpointDoc doc = checkpoint_of(ps, "arch");
  CHECK(doc.tensor("w").data[0] == 4.0);

  ParameterSet same;
  same.add("w", {2});
  load_into(same, doc);
  CHECK(same.value("w")[0] == 4.0);

  ParameterSet wrong;
  wrong.add("w", {3});
  CHECK_THROWS_AS(load_into(wrong, doc), ConfigError);
}

TEST_CASE("format_double survives strtod round trips") {
  for (double v : {0.1, -1.0 / 3.0, 1e-300, 123456.789, 0.0}) {
    std::string s = format_double(v);
    double back = std::strtod(s.c_str(), nullptr);
    CHECK(std::memcmp(&back, &v, sizeof(double)) == 0);
  }
  CHECK(parse_widths(join_widths({64, 32})) == std::vector<int>{64, 32});
}

TEST_CASE("rng streams are deterministic and label-separated") {
  Rng a(7), b(7);
  for (int i = 0; i < 16; ++i) CHECK(a.u64() == b.u64());

  Rng base(7);
  Rng s1 = base.spawn("alpha");
  Rng s2 = base.spawn("beta");
  CHECK(s1.u64() != s2.u64());
  CHECK(mix_seed(7, "alpha") == mix_seed(7, fnv1a64("alpha")));
  CHECK(mix_seed(7, "alpha") != mix_seed(7, "beta"));
  CHECK(mix_seed(7, "alpha") != mix_seed(8, "alpha"));

  Rng u(11);
  for (int i = 0; i < 1000; ++i) {
    double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  Rng n(13);
  double mean = 0.0;
  for (int i = 0; i < 4000; ++i) mean += n.normal();
  mean /= 4000.0;
  CHECK(std::fabs(mean) < 0.1);  // ~6 sigma of the sample mean
}

TEST_CASE("sample_distinct draws k distinct indices deterministically") {
  Rng r1(3), r2(3);
  auto a = sample_distinct(50, 10, r1);
  auto b = sample_distinct(50, 10, r2);
  CHECK(a == b);
  std::set<int> seen(a.begin(), a.end());
  CHECK(seen.size() == 10);
  for (int v : a) {
    CHECK(v >= 0);
    CHECK(v < 50);
  }
  Rng r3(4);
  auto full = sample_distinct(6, 6, r3);
  std::set<int> all(full.begin(), full.end());
  CHECK(all.size() == 6);
}

TEST_CASE("shuffle is deterministic for a fixed seed") {
  std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<int> v2 = v1;
  Rng r1(99), r2(99);
  shuffle(v1, r1);
  shuffle(v2, r2);
  CHECK(v1 == v2);
  std::set<int> s(v1.begin(), v1.end());
  CHECK(s.size() == 8);
}

TEST_CASE("parallel_for results do not depend on the thread cap") {
  const int64_t n = 1000;
  std::vector<double> serial(n), parallel(n);

  set_max_threads(1);
  parallel_for(n, [&](int64_t i) {
    serial[static_cast<size_t>(i)] = std::sin(static_cast<double>(i)) * 1.5;
  });
  set_max_threads(4);
  parallel_for(n, [&](int64_t i) {
    parallel[static_cast<size_t>(i)] = std::sin(static_cast<double>(i)) * 1.5;
  });
  set_max_threads(0);
  CHECK(serial == parallel);
}

TEST_CASE("parallel_for rethrows a work-item exception") {
  set_max_threads(4);
  std::atomic<int> ran{0};
  auto body = [&](int64_t i) {
    ran.fetch_add(1);
    if (i == 17) throw DataError("boom");
  };
  CHECK_THROWS_AS(parallel_for(64, body), DataError);
  CHECK(ran.load() == 64);  // remaining items still execute
  set_max_threads(0);
}

TEST_CASE("optimized kernels agree with the reference kernels") {
  Rng rng(2024);
  for (int n : {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 33, 100}) {
    std::vector<double> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
    for (double& v : a) v = rng.uniform(-1, 1);
    for (double& v : b) v = rng.uniform(-1, 1);
    double fast = dot(a.data(), b.data(), n);
    double ref = refk::dot(a.data(), b.data(), n);
    CHECK(fast == doctest::Approx(ref).epsilon(1e-13));
  }

  const int rows = 7, cols = 13;
  std::vector<double> W(rows * cols), x(cols), bias(rows);
  for (double& v : W) v = rng.uniform(-1, 1);
  for (double& v : x) v = rng.uniform(-1, 1);
  for (double& v : bias) v = rng.uniform(-1, 1);
  std::vector<double> y1(rows), y2(rows);
  matvec(W.data(), x.data(), bias.data(), y1.data(), rows, cols);
  refk::matvec(W.data(), x.data(), bias.data(), y2.data(), rows, cols);
  for (int r = 0; r < rows; ++r)
    CHECK(y1[static_cast<size_t>(r)] ==
          doctest::Approx(y2[static_cast<size_t>(r)]).epsilon(1e-13));

  // no-bias path
  matvec(W.data(), x.data(), nullptr, y1.data(), rows, cols);
  refk::matvec(W.data(), x.data(), nullptr, y2.data(), rows, cols);
  for (int r = 0; r < rows; ++r)
    CHECK(y1[static_cast<size_t>(r)] ==
          doctest::Approx(y2[static_cast<size_t>(r)]).epsilon(1e-13));
}

TEST_CASE("axpy, transposed matvec and rank-one update match naive loops") {
  Rng rng(5);
  const int rows = 5, cols = 9;
  std::vector<double> W(rows * cols), dy(rows), x(cols);
  for (double& v : W) v = rng.uniform(-1, 1);
  for (double& v : dy) v = rng.uniform(-1, 1);
  for (double& v : x) v = rng.uniform(-1, 1);

  std::vector<double> dx1(cols, 0.1), dx2(cols, 0.1);
  matvec_t_acc(W.data(), dy.data(), dx1.data(), rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r)
      dx2[static_cast<size_t>(c)] +=
          W[static_cast<size_t>(r * cols + c)] * dy[static_cast<size_t>(r)];
  for (int c = 0; c < cols; ++c)
    CHECK(dx1[static_cast<size_t>(c)] ==
          doctest::Approx(dx2[static_cast<size_t>(c)]).epsilon(1e-13));

  std::vector<double> dW1(rows * cols, 0.0), dW2(rows * cols, 0.0);
  std::vector<double> db1(rows, 0.0), db2(rows, 0.0);
  ger_acc(dW1.data(), db1.data(), dy.data(), x.data(), rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c)
      dW2[static_cast<size_t>(r * cols + c)] +=
          dy[static_cast<size_t>(r)] * x[static_cast<size_t>(c)];
    db2[static_cast<size_t>(r)] += dy[static_cast<size_t>(r)];
  }
  CHECK(dW1 == dW2);  // same multiply-add per slot, identical order
  CHECK(db1 == db2);

  std::vector<double> y(cols, 2.0);
  axpy(0.5, x.data(), y.data(), cols);
  for (int c = 0; c < cols; ++c)
    CHECK(y[static_cast<size_t>(c)] == 2.0 + 0.5 * x[static_cast<size_t>(c)]);
}

TEST_CASE("scalar ops: sigmoid, softmax, log-sum-exp, cross-entropy") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(100.0) <= 1.0 - kProbEps);
  CHECK(sigmoid(-100.0) >= kProbEps);
  CHECK(clamp_prob(2.0) == 1.0 - kProbEps);
  CHECK(clamp_prob(-1.0) == kProbEps);

  std::vector<double> v{0.3, -1.2, 2.5, 0.0};
  double lse = log_sum_exp(v);
  double direct = 0.0;
  for (double x : v) direct += std::exp(x);
  CHECK(lse == doctest::Approx(std::log(direct)).epsilon(1e-12));

  std::vector<double> sm = v;
  softmax_inplace(sm);
  double sum = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    CHECK(sm[i] == doctest::Approx(std::exp(v[i] - lse)).epsilon(1e-12));
    sum += sm[i];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(binary_cross_entropy(0.5, 1.0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(binary_cross_entropy(1.0, 1.0) ==
        doctest::Approx(-std::log(1.0 - kProbEps)).epsilon(1e-6));
  // gradient vs central difference
  double p = 0.3, y = 1.0, h = 1e-6;
  double num = (binary_cross_entropy(p + h, y) - binary_cross_entropy(p - h, y)) /
               (2 * h);
  CHECK(binary_cross_entropy_grad(p, y) == doctest::Approx(num).epsilon(1e-6));
}

TEST_CASE("activation derivatives match finite differences of the forward map") {
  for (Act a : {Act::none, Act::tanh, Act::sigmoid}) {
    for (double z : {-1.3, -0.2, 0.4, 2.0}) {
      double h = 1e-6;
      double num = (apply_act(a, z + h) - apply_act(a, z - h)) / (2 * h);
      double ana = act_grad_from_output(a, apply_act(a, z));
      CHECK(ana == doctest::Approx(num).epsilon(1e-5));
    }
  }
  CHECK(act_grad_from_output(Act::relu, apply_act(Act::relu, 2.0)) == 1.0);
  CHECK(act_grad_from_output(Act::relu, apply_act(Act::relu, -2.0)) == 0.0);
  CHECK(act_from_string("tanh") == Act::tanh);
  CHECK_THROWS_AS(act_from_string("bogus"), ConfigError);
  CHECK(std::string(act_to_string(Act::sigmoid)) == "sigmoid");
}
