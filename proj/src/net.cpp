#include "ppob/net.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ppob {

namespace {

DenseLayer make_layer(int in, int out, double gain, Rng& rng) {
  DenseLayer layer;
  layer.in = in;
  layer.out = out;
  layer.w.resize(static_cast<std::size_t>(in) * out);
  layer.b.assign(out, 0.0);
  const double limit = gain * std::sqrt(6.0 / (in + out));
  for (auto& wij : layer.w) wij = rng.uniform(-limit, limit);
  return layer;
}

Mlp make_mlp(int in, int hidden, int out, double head_gain, Rng& rng) {
  Mlp net;
  net.layers.push_back(make_layer(in, hidden, 1.0, rng));
  net.layers.push_back(make_layer(hidden, hidden, 1.0, rng));
  net.layers.push_back(make_layer(hidden, out, head_gain, rng));
  return net;
}

Mlp zero_like(const Mlp& net) {
  Mlp z;
  z.layers.reserve(net.layers.size());
  for (const auto& layer : net.layers) {
    DenseLayer g;
    g.in = layer.in;
    g.out = layer.out;
    g.w.assign(layer.w.size(), 0.0);
    g.b.assign(layer.b.size(), 0.0);
    z.layers.push_back(std::move(g));
  }
  return z;
}

template <typename MlpT, typename Fn>
void visit_mlp(MlpT& net, Fn&& fn) {
  for (auto& layer : net.layers) {
    for (auto& x : layer.w) fn(x);
    for (auto& x : layer.b) fn(x);
  }
}

template <typename ParamsT, typename Fn>
void visit_all(ParamsT& params, Fn&& fn) {
  visit_mlp(params.policy, fn);
  visit_mlp(params.value, fn);
  for (auto& x : params.log_std) fn(x);
}

}  // namespace

PolicyParams make_policy_params(HeadKind head, int obs_dim, int act_dim, std::uint64_t seed,
                                int hidden_width) {
  if (obs_dim <= 0 || act_dim <= 0 || hidden_width <= 0)
    throw ConfigError("make_policy_params: dimensions must be positive");
  PolicyParams params;
  params.head = head;
  params.obs_dim = obs_dim;
  params.act_dim = act_dim;
  params.init_seed = seed;
  Rng rng(splitmix64(seed ^ 0xb0a7f00dULL));
  params.policy = make_mlp(obs_dim, hidden_width, act_dim, 0.01, rng);
  params.value = make_mlp(obs_dim, hidden_width, 1, 1.0, rng);
  if (head == HeadKind::diag_gaussian) params.log_std.assign(act_dim, 0.0);
  return params;
}

GradientTape zero_tape(const PolicyParams& params) {
  GradientTape tape;
  tape.policy = zero_like(params.policy);
  tape.value = zero_like(params.value);
  tape.log_std.assign(params.log_std.size(), 0.0);
  return tape;
}

std::size_t param_count(const PolicyParams& params) {
  std::size_t n = 0;
  visit_all(const_cast<PolicyParams&>(params), [&n](double&) { ++n; });
  return n;
}

std::vector<double> flatten(const PolicyParams& params) {
  std::vector<double> flat;
  flat.reserve(param_count(params));
  visit_all(const_cast<PolicyParams&>(params), [&flat](double& x) { flat.push_back(x); });
  return flat;
}

std::vector<double> flatten(const GradientTape& tape) {
  std::vector<double> flat;
  visit_all(const_cast<GradientTape&>(tape), [&flat](double& x) { flat.push_back(x); });
  return flat;
}

void unflatten(const std::vector<double>& flat, PolicyParams& params) {
  if (flat.size() != param_count(params)) throw UsageError("unflatten: size mismatch");
  std::size_t i = 0;
  visit_all(params, [&flat, &i](double& x) { x = flat[i++]; });
}

std::vector<double> mlp_forward(const Mlp& net, const std::vector<double>& input,
                                MlpCache* cache) {
  if (net.layers.empty()) throw UsageError("mlp_forward: empty network");
  if (static_cast<int>(input.size()) != net.layers.front().in)
    throw ConfigError("mlp_forward: input dimension mismatch");
  std::vector<double> x = input;
  if (cache) {
    cache->acts.clear();
    cache->acts.push_back(x);
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    std::vector<double> y(layer.out);
    for (int o = 0; o < layer.out; ++o) {
      double acc = layer.b[o];
      const double* wrow = &layer.w[static_cast<std::size_t>(o) * layer.in];
      for (int i = 0; i < layer.in; ++i) acc += wrow[i] * x[i];
      y[o] = acc;
    }
    const bool last = (l + 1 == net.layers.size());
    if (!last) {
      for (auto& v : y) v = std::tanh(v);
    }
    for (double v : y) {
      if (!std::isfinite(v))
        throw NumericFault("mlp_forward: non-finite activation at layer " + std::to_string(l));
    }
    x = std::move(y);
    if (cache) cache->acts.push_back(x);
  }
  return x;
}

void mlp_backward(const Mlp& net, const MlpCache& cache, const std::vector<double>& d_output,
                  Mlp& grad) {
  if (cache.acts.size() != net.layers.size() + 1) throw UsageError("mlp_backward: stale cache");
  std::vector<double> d = d_output;
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const auto& layer = net.layers[l];
    auto& glayer = grad.layers[l];
    const auto& x = cache.acts[l];  // layer input
    // d is d(loss)/d(pre-activation) for the last layer (identity output);
    // for hidden layers fold in the tanh derivative first.
    if (l + 1 != net.layers.size()) {
      const auto& a = cache.acts[l + 1];
      for (int o = 0; o < layer.out; ++o) d[o] *= 1.0 - a[o] * a[o];
    }
    for (int o = 0; o < layer.out; ++o) {
      glayer.b[o] += d[o];
      double* grow = &glayer.w[static_cast<std::size_t>(o) * layer.in];
      for (int i = 0; i < layer.in; ++i) grow[i] += d[o] * x[i];
    }
    if (l > 0) {
      std::vector<double> d_prev(layer.in, 0.0);
      for (int o = 0; o < layer.out; ++o) {
        const double* wrow = &layer.w[static_cast<std::size_t>(o) * layer.in];
        for (int i = 0; i < layer.in; ++i) d_prev[i] += wrow[i] * d[o];
      }
      d = std::move(d_prev);
    }
  }
}

std::pair<ActionDistribution, double> forward(const PolicyParams& params,
                                              const std::vector<double>& state) {
  if (static_cast<int>(state.size()) != params.obs_dim)
    throw ConfigError("forward: state dimension mismatch");
  std::vector<double> head_out = mlp_forward(params.policy, state);
  const std::vector<double> value_out = mlp_forward(params.value, state);
  check_finite(value_out[0], "value output");
  if (params.head == HeadKind::categorical) {
    return {make_categorical(std::move(head_out)), value_out[0]};
  }
  return {make_diag_gaussian(std::move(head_out), params.log_std), value_out[0]};
}

OptimizerState make_optimizer(OptimizerState::Algo algo, double step_size,
                              const PolicyParams& params) {
  OptimizerState opt;
  opt.algo = algo;
  opt.step_size = step_size;
  if (algo == OptimizerState::Algo::adam) {
    opt.m.assign(param_count(params), 0.0);
    opt.v.assign(param_count(params), 0.0);
  }
  return opt;
}

void optimizer_step(PolicyParams& params, const GradientTape& tape, OptimizerState& opt,
                    double step_scale) {
  const std::size_t n = param_count(params);
  std::vector<double> grads = flatten(tape);
  if (grads.size() != n) throw UsageError("optimizer_step: tape shape mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grads[i]))
      throw NumericFault("optimizer_step: non-finite gradient at parameter " + std::to_string(i));
  }
  opt.step_count += 1;
  const double lr = opt.step_size * step_scale;
  std::size_t i = 0;
  if (opt.algo == OptimizerState::Algo::sgd) {
    visit_all(params, [&](double& x) { x -= lr * grads[i++]; });
    return;
  }
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
  visit_all(params, [&](double& x) {
    const double g = grads[i];
    opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * g;
    opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * g * g;
    const double mhat = opt.m[i] / bc1;
    const double vhat = opt.v[i] / bc2;
    x -= lr * mhat / (std::sqrt(vhat) + opt.eps);
    ++i;
  });
}

namespace {

void write_values(std::FILE* f, const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i)
    std::fprintf(f, "%s%a", i == 0 ? "" : " ", values[i]);
  std::fprintf(f, "\n");
}

std::vector<double> read_values(std::istream& in, std::size_t n) {
  std::vector<double> values;
  values.reserve(n);
  std::string tok;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> tok)) throw UsageError("checkpoint: truncated value block");
    values.push_back(std::strtod(tok.c_str(), nullptr));
  }
  return values;
}

void write_mlp(std::FILE* f, const char* name, const Mlp& net) {
  std::fprintf(f, "%s %zu\n", name, net.layers.size());
  for (const auto& layer : net.layers) {
    std::fprintf(f, "layer %d %d\n", layer.out, layer.in);
    write_values(f, layer.w);
    write_values(f, layer.b);
  }
}

Mlp read_mlp(std::istream& in, const char* name) {
  std::string tag;
  std::size_t count = 0;
  in >> tag >> count;
  if (tag != name) throw UsageError("checkpoint: expected section " + std::string(name));
  Mlp net;
  for (std::size_t l = 0; l < count; ++l) {
    DenseLayer layer;
    in >> tag >> layer.out >> layer.in;
    if (tag != "layer" || layer.out <= 0 || layer.in <= 0)
      throw UsageError("checkpoint: malformed layer header");
    layer.w = read_values(in, static_cast<std::size_t>(layer.out) * layer.in);
    layer.b = read_values(in, static_cast<std::size_t>(layer.out));
    net.layers.push_back(std::move(layer));
  }
  return net;
}

}  // namespace

void save_checkpoint(const PolicyParams& params, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw UsageError("save_checkpoint: cannot open " + path);
  std::fprintf(f, "ppob-checkpoint v1\n");
  std::fprintf(f, "head %s\n", params.head == HeadKind::categorical ? "categorical" : "gaussian");
  std::fprintf(f, "dims %d %d\n", params.obs_dim, params.act_dim);
  std::fprintf(f, "seed %llu\n", static_cast<unsigned long long>(params.init_seed));
  write_mlp(f, "policy", params.policy);
  write_mlp(f, "value", params.value);
  std::fprintf(f, "log_std %zu\n", params.log_std.size());
  if (!params.log_std.empty()) write_values(f, params.log_std);
  std::fclose(f);
}

PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("load_checkpoint: cannot open " + path);
  std::string magic, version;
  in >> magic >> version;
  if (magic != "ppob-checkpoint" || version != "v1")
    throw UsageError("load_checkpoint: unrecognized format");
  PolicyParams params;
  std::string tag, head;
  in >> tag >> head;
  if (tag != "head") throw UsageError("checkpoint: missing head");
  if (head == "categorical") {
    params.head = HeadKind::categorical;
  } else if (head == "gaussian") {
    params.head = HeadKind::diag_gaussian;
  } else {
    throw UsageError("checkpoint: unknown head kind '" + head + "'");
  }
  in >> tag >> params.obs_dim >> params.act_dim;
  if (tag != "dims") throw UsageError("checkpoint: missing dims");
  unsigned long long seed = 0;
  in >> tag >> seed;
  if (tag != "seed") throw UsageError("checkpoint: missing seed");
  params.init_seed = seed;
  params.policy = read_mlp(in, "policy");
  params.value = read_mlp(in, "value");
  std::size_t n_log_std = 0;
  in >> tag >> n_log_std;
  if (tag != "log_std") throw UsageError("checkpoint: missing log_std");
  params.log_std = read_values(in, n_log_std);
  return params;
}

}  // namespace ppob
