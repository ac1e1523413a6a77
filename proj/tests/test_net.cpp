#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <limits>

#include "ppob/net.hpp"
#include "test_util.hpp"

using namespace ppob;
using namespace ppob::testutil;

namespace {

PolicyParams zero_weight_params(HeadKind head, int obs, int act) {
  PolicyParams params = make_policy_params(head, obs, act, 7, 8);
  std::vector<double> flat(param_count(params), 0.0);
  unflatten(flat, params);
  return params;
}

}  // namespace

TEST_CASE("forward: zero-weight network gives uniform categorical and zero value") {
  PolicyParams params = zero_weight_params(HeadKind::categorical, 3, 4);
  auto [dist, value] = forward(params, {0.3, -0.7, 1.1});
  const auto& c = std::get<Categorical>(dist);
  for (double p : c.probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(value == 0.0);
}

TEST_CASE("forward: deterministic and shape-checked") {
  PolicyParams params = make_policy_params(HeadKind::diag_gaussian, 4, 2, 99);
  const std::vector<double> state = {0.1, -0.2, 0.5, 2.0};
  auto [d1, v1] = forward(params, state);
  auto [d2, v2] = forward(params, state);
  CHECK(v1 == v2);
  const auto& g1 = std::get<DiagGaussian>(d1);
  const auto& g2 = std::get<DiagGaussian>(d2);
  for (std::size_t i = 0; i < g1.mean.size(); ++i) {
    CHECK(g1.mean[i] == g2.mean[i]);
    CHECK(g1.std_dev[i] > 0.0);
  }
  CHECK_THROWS_AS(forward(params, {0.1, 0.2}), ConfigError);
}

TEST_CASE("forward: categorical probabilities sum to one") {
  PolicyParams params = make_policy_params(HeadKind::categorical, 5, 6, 1234);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> state(5);
    for (auto& s : state) s = rng.uniform(-3.0, 3.0);
    auto [dist, value] = forward(params, state);
    (void)value;
    const auto& c = std::get<Categorical>(dist);
    double sum = 0.0;
    for (double p : c.probs) sum += p;
    CHECK(std::fabs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("log_prob: closed-form anchors") {
  Categorical uniform = make_categorical({0.0, 0.0, 0.0, 0.0});
  Action a0;
  a0.index = 0;
  CHECK(log_prob(uniform, a0) == doctest::Approx(std::log(0.25)).epsilon(1e-12));

  DiagGaussian std_normal = make_diag_gaussian({0.0}, {0.0});
  Action zero;
  zero.vec = {0.0};
  CHECK(log_prob(std_normal, zero) ==
        doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));

  // Direct-evaluation oracle for a skewed categorical.
  Categorical skew = make_categorical({std::log(0.25), std::log(0.75)});
  Action a1;
  a1.index = 1;
  CHECK(log_prob(skew, a1) == doctest::Approx(std::log(0.75)).epsilon(1e-10));

  Action bad;
  bad.index = 9;
  CHECK_THROWS_AS(log_prob(uniform, bad), UsageError);
}

TEST_CASE("backward: zero output gradient leaves the tape zero") {
  PolicyParams params = make_policy_params(HeadKind::categorical, 3, 2, 21, 4);
  MlpCache cache;
  mlp_forward(params.policy, {0.2, 0.4, -0.1}, &cache);
  GradientTape tape = zero_tape(params);
  mlp_backward(params.policy, cache, {0.0, 0.0}, tape.policy);
  for (double g : flatten(tape)) CHECK(g == 0.0);
}

TEST_CASE("backward: value head matches central finite differences") {
  PolicyParams params = make_policy_params(HeadKind::categorical, 3, 2, 42, 4);
  const std::vector<double> state = {0.9, -0.4, 0.2};

  GradientTape tape = zero_tape(params);
  MlpCache cache;
  mlp_forward(params.value, state, &cache);
  mlp_backward(params.value, cache, {1.0}, tape.value);

  const auto fd = fd_gradient(
      params, [&state](const PolicyParams& p) { return mlp_forward(p.value, state)[0]; });
  CHECK(max_rel_error(flatten(tape), fd) < 1e-4);
}

TEST_CASE("backward: log-prob losses match finite differences, both heads") {
  for (HeadKind head : {HeadKind::categorical, HeadKind::diag_gaussian}) {
    PolicyParams params = make_policy_params(head, 3, 2, 77, 4);
    const std::vector<double> state = {0.3, 0.8, -0.6};
    Rng rng(11);
    auto [dist0, v0] = forward(params, state);
    (void)v0;
    const Action action = sample(dist0, rng);

    const auto loss = [&state, &action](const PolicyParams& p) {
      auto [dist, value] = forward(p, state);
      (void)value;
      return log_prob(dist, action);
    };

    GradientTape tape = zero_tape(params);
    MlpCache cache;
    std::vector<double> head_out = mlp_forward(params.policy, state, &cache);
    ActionDistribution dist =
        head == HeadKind::categorical
            ? ActionDistribution(make_categorical(std::move(head_out)))
            : ActionDistribution(make_diag_gaussian(std::move(head_out), params.log_std));
    mlp_backward(params.policy, cache, dlogprob_dhead(dist, action), tape.policy);
    if (head == HeadKind::diag_gaussian) {
      const auto dls = dlogprob_dlogstd(dist, action);
      for (std::size_t i = 0; i < dls.size(); ++i) tape.log_std[i] += dls[i];
    }

    const auto fd = fd_gradient(params, loss);
    CHECK(max_rel_error(flatten(tape), fd) < 1e-4);
  }
}

TEST_CASE("optimizer: zero tape is a no-op, counter still advances") {
  PolicyParams params = make_policy_params(HeadKind::categorical, 3, 2, 5, 4);
  const std::vector<double> before = flatten(params);
  OptimizerState opt = make_optimizer(OptimizerState::Algo::adam, 0.1, params);
  optimizer_step(params, zero_tape(params), opt);
  CHECK(opt.step_count == 1);
  const std::vector<double> after = flatten(params);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("optimizer: single sgd step moves one parameter by -lr*g") {
  PolicyParams params = make_policy_params(HeadKind::categorical, 3, 2, 5, 4);
  const std::vector<double> before = flatten(params);
  GradientTape tape = zero_tape(params);
  tape.policy.layers[0].w[0] = 1.0;
  OptimizerState opt = make_optimizer(OptimizerState::Algo::sgd, 0.1, params);
  optimizer_step(params, tape, opt);
  const std::vector<double> after = flatten(params);
  CHECK(after[0] == doctest::Approx(before[0] - 0.1).epsilon(1e-15));
  for (std::size_t i = 1; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("optimizer: first adam step follows the hand-executed recurrence") {
  PolicyParams params = make_policy_params(HeadKind::categorical, 3, 2, 5, 4);
  const std::vector<double> before = flatten(params);
  const double g = 0.5;
  const double lr = 0.01;
  GradientTape tape = zero_tape(params);
  tape.policy.layers[0].w[0] = g;
  OptimizerState opt = make_optimizer(OptimizerState::Algo::adam, lr, params);
  optimizer_step(params, tape, opt);

  // One step by hand: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps).
  const double expected = lr * g / (std::fabs(g) + 1e-5);
  const std::vector<double> after = flatten(params);
  CHECK(after[0] == doctest::Approx(before[0] - expected).epsilon(1e-12));
  CHECK(std::fabs(after[0] - before[0]) == doctest::Approx(lr).epsilon(1e-4));
}

TEST_CASE("optimizer: non-finite gradient raises a numeric fault") {
  PolicyParams params = make_policy_params(HeadKind::categorical, 3, 2, 5, 4);
  GradientTape tape = zero_tape(params);
  tape.policy.layers[0].w[0] = std::numeric_limits<double>::quiet_NaN();
  OptimizerState opt = make_optimizer(OptimizerState::Algo::adam, 0.1, params);
  CHECK_THROWS_AS(optimizer_step(params, tape, opt), NumericFault);
}

TEST_CASE("checkpoint: bit-exact round trip for both heads") {
  for (HeadKind head : {HeadKind::categorical, HeadKind::diag_gaussian}) {
    PolicyParams params = make_policy_params(head, 4, 3, 20240817);
    // Scramble so values are not fresh-init artifacts.
    params = perturbed(params, 0.73, 99);
    const std::string path = "ckpt_roundtrip_test.txt";
    save_checkpoint(params, path);
    const PolicyParams loaded = load_checkpoint(path);
    std::remove(path.c_str());

    CHECK(loaded.head == params.head);
    CHECK(loaded.obs_dim == params.obs_dim);
    CHECK(loaded.act_dim == params.act_dim);
    CHECK(loaded.init_seed == params.init_seed);
    const auto a = flatten(params);
    const auto b = flatten(loaded);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
}
