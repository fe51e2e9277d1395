#include "ranklab/core/mlp.hpp"

#include "ranklab/core/error.hpp"
#include "ranklab/core/kernels.hpp"
#include "ranklab/core/rng.hpp"

namespace ranklab {

namespace {

void check_spec(const MlpSpec& spec) {
  if (spec.widths.size() < 2)
    throw ConfigError("mlp needs at least an input and one layer width");
  for (int w : spec.widths)
    if (w <= 0) throw ConfigError("mlp layer widths must be positive");
}

std::string w_name(const std::string& prefix, int l) {
  return prefix + "/W" + std::to_string(l);
}
std::string b_name(const std::string& prefix, int l) {
  return prefix + "/b" + std::to_string(l);
}

}  // namespace

void mlp_init(ParameterSet& ps, const std::string& prefix, const MlpSpec& spec,
              Rng& rng) {
  check_spec(spec);
  for (int l = 0; l < spec.layers(); ++l) {
    int in = spec.widths[static_cast<size_t>(l)];
    int out = spec.widths[static_cast<size_t>(l) + 1];
    ps.add(w_name(prefix, l), {out, in});
    ps.add(b_name(prefix, l), {out});
    init_uniform_fan_in(ps, w_name(prefix, l), in, rng);
    // biases stay zero
  }
}

MlpRef mlp_ref(const ParameterSet& ps, const std::string& prefix,
               const MlpSpec& spec) {
  check_spec(spec);
  MlpRef ref;
  ref.spec = spec;
  for (int l = 0; l < spec.layers(); ++l) {
    ref.w_idx.push_back(ps.find(w_name(prefix, l)));
    ref.b_idx.push_back(ps.find(b_name(prefix, l)));
  }
  return ref;
}

void mlp_forward(const ParameterSet& ps, const MlpRef& ref,
                 std::span<const double> in, std::span<double> out,
                 MlpCache& cache) {
  const MlpSpec& spec = ref.spec;
  if (static_cast<int>(in.size()) != spec.input_width())
    throw ConfigError("mlp input width " + std::to_string(in.size()) +
                      ", expected " + std::to_string(spec.input_width()));
  if (static_cast<int>(out.size()) != spec.output_width())
    throw ConfigError("mlp output span has the wrong width");

  const int L = spec.layers();
  cache.x.resize(static_cast<size_t>(L) + 1);
  cache.x[0].assign(in.begin(), in.end());
  for (int l = 0; l < L; ++l) {
    int rows = spec.widths[static_cast<size_t>(l) + 1];
    int cols = spec.widths[static_cast<size_t>(l)];
    auto& y = cache.x[static_cast<size_t>(l) + 1];
    y.resize(static_cast<size_t>(rows));
    matvec(ps.value(ref.w_idx[static_cast<size_t>(l)]).data(),
           cache.x[static_cast<size_t>(l)].data(),
           ps.value(ref.b_idx[static_cast<size_t>(l)]).data(), y.data(), rows,
           cols);
    Act a = (l + 1 == L) ? spec.output : spec.hidden;
    if (a != Act::none)
      for (double& v : y) v = apply_act(a, v);
  }
  const auto& top = cache.x[static_cast<size_t>(L)];
  std::copy(top.begin(), top.end(), out.begin());
  cache.params_version = ps.version();
}

void mlp_backward(const ParameterSet& ps, const MlpRef& ref,
                  const MlpCache& cache, std::span<const double> dout,
                  std::span<double> dinput, GradBuffer& gb) {
  const MlpSpec& spec = ref.spec;
  if (cache.params_version != ps.version())
    throw StaleCacheError("mlp backward given a cache from parameter version " +
                          std::to_string(cache.params_version) + ", now at " +
                          std::to_string(ps.version()));
  const int L = spec.layers();
  auto& dbuf = cache.dbuf;
  dbuf.resize(2);
  std::vector<double>& dy = dbuf[0];
  std::vector<double>& dx = dbuf[1];
  dy.assign(dout.begin(), dout.end());

  for (int l = L - 1; l >= 0; --l) {
    int rows = spec.widths[static_cast<size_t>(l) + 1];
    int cols = spec.widths[static_cast<size_t>(l)];
    Act a = (l + 1 == L) ? spec.output : spec.hidden;
    const auto& y = cache.x[static_cast<size_t>(l) + 1];
    if (a != Act::none)
      for (int r = 0; r < rows; ++r) dy[static_cast<size_t>(r)] *= act_grad_from_output(a, y[static_cast<size_t>(r)]);

    ger_acc(gb.of(ps, ref.w_idx[static_cast<size_t>(l)]).data(),
            gb.of(ps, ref.b_idx[static_cast<size_t>(l)]).data(), dy.data(),
            cache.x[static_cast<size_t>(l)].data(), rows, cols);

    bool need_dx = l > 0 || !dinput.empty();
    if (need_dx) {
      dx.assign(static_cast<size_t>(cols), 0.0);
      matvec_t_acc(ps.value(ref.w_idx[static_cast<size_t>(l)]).data(), dy.data(),
                   dx.data(), rows, cols);
    }
    if (l > 0) {
      dy.swap(dx);
    }
  }
  if (!dinput.empty()) {
    if (dinput.size() != static_cast<size_t>(spec.input_width()))
      throw ConfigError("mlp dinput span has the wrong width");
    std::copy(dx.begin(), dx.end(), dinput.begin());
  }
}

std::vector<double> mlp_forward(const ParameterSet& ps, const std::string& prefix,
                                const MlpSpec& spec, std::span<const double> in) {
  MlpRef ref = mlp_ref(ps, prefix, spec);
  MlpCache cache;
  std::vector<double> out(static_cast<size_t>(spec.output_width()));
  mlp_forward(ps, ref, in, out, cache);
  return out;
}

}  // namespace ranklab
