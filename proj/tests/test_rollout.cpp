#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ppob/envs.hpp"
#include "ppob/rollout.hpp"
#include "test_util.hpp"

using namespace ppob;
using namespace ppob::testutil;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

PolicyParams uniform_corridor_params() {
  PolicyParams params = make_policy_params(HeadKind::categorical, 5, 2, 3, 8);
  std::vector<double> flat(param_count(params), 0.0);
  unflatten(flat, params);
  return params;
}

PolicyParams always_right_params() {
  PolicyParams params = uniform_corridor_params();
  params.policy.layers.back().b[1] = 50.0;  // logit so large sampling never goes left
  return params;
}

std::vector<std::unique_ptr<Env>> corridor_fleet(int n) {
  std::vector<std::unique_ptr<Env>> envs;
  for (int i = 0; i < n; ++i) envs.push_back(make_env("corridor"));
  return envs;
}

int cell_of(const RolloutBatch& batch, int slot) {
  const double* s = batch.state_at(slot);
  for (int k = 0; k < batch.obs_dim; ++k)
    if (s[k] == 1.0) return k;
  return -1;
}

// Hand-built single-actor batch for direct GAE arithmetic.
RolloutBatch manual_batch(const std::vector<double>& rewards, const std::vector<double>& values,
                          const std::vector<int>& terminal, const std::vector<double>& boot) {
  const int n = static_cast<int>(rewards.size());
  RolloutBatch batch;
  batch.head = HeadKind::categorical;
  batch.obs_dim = 1;
  batch.act_dim = 2;
  batch.num_actors = 1;
  batch.horizon = n;
  batch.states.assign(n, 0.0);
  batch.actions.resize(n);
  batch.rewards = rewards;
  batch.done.assign(n, 0);
  batch.timeout.assign(n, 0);
  batch.terminal.assign(n, 0);
  for (int t = 0; t < n; ++t) {
    batch.terminal[t] = static_cast<std::uint8_t>(terminal[t]);
    batch.done[t] = static_cast<std::uint8_t>(terminal[t]);
  }
  batch.old_log_prob.assign(n, 0.0);
  batch.old_prob_at_action.assign(n, 1.0);
  batch.old_value = values;
  batch.next_value = boot;
  batch.old_probs.assign(static_cast<std::size_t>(n) * 2, 0.5);
  batch.advantages.assign(n, 0.0);
  batch.returns.assign(n, 0.0);
  return batch;
}

}  // namespace

TEST_CASE("collect: always-right policy walks the corridor optimally") {
  auto envs = corridor_fleet(1);
  const PolicyParams params = always_right_params();
  std::vector<double> acc;
  const RolloutBatch batch = collect(params, envs, 4, 12, &acc);
  REQUIRE(batch.size() == 4);
  CHECK(batch.rewards == std::vector<double>{0, 0, 0, 1});
  CHECK(batch.terminal[3] == 1);
  CHECK(batch.timeout[3] == 0);
  for (int t = 0; t < 4; ++t) {
    CHECK(cell_of(batch, t) == t);
    CHECK(batch.old_prob_at_action[t] == doctest::Approx(1.0).epsilon(1e-10));
  }
  CHECK(batch.completed_episode_returns == std::vector<double>{1.0});
}

TEST_CASE("collect: identical seeds and fresh envs give identical batches") {
  const PolicyParams params = uniform_corridor_params();
  auto envs_a = corridor_fleet(2);
  auto envs_b = corridor_fleet(2);
  const RolloutBatch a = collect(params, envs_a, 16, 555);
  const RolloutBatch b = collect(params, envs_b, 16, 555);
  CHECK(a.states == b.states);
  CHECK(a.rewards == b.rewards);
  CHECK(a.old_log_prob == b.old_log_prob);
  CHECK(a.old_value == b.old_value);
  for (int i = 0; i < a.size(); ++i) CHECK(a.actions[i].index == b.actions[i].index);
}

TEST_CASE("collect: actor-contiguous layout and log-prob consistency") {
  const PolicyParams params = uniform_corridor_params();
  auto envs = corridor_fleet(2);
  const RolloutBatch batch = collect(params, envs, 3, 9);
  REQUIRE(batch.size() == 6);
  CHECK(batch.num_actors == 2);
  CHECK(batch.horizon == 3);
  // Both actors start their block at the fixed initial cell.
  CHECK(cell_of(batch, 0) == 0);
  CHECK(cell_of(batch, 3) == 0);
  for (int i = 0; i < batch.size(); ++i) {
    if (batch.old_prob_at_action[i] > 0.0)
      CHECK(std::fabs(batch.old_log_prob[i] - std::log(batch.old_prob_at_action[i])) < 1e-9);
  }
}

TEST_CASE("compute_gae: lambda = 0 collapses to one-step deltas") {
  const std::vector<double> rewards = {1.0, 2.0, 3.0, 4.0};
  const std::vector<double> values = {0.5, 1.0, 1.5, 2.0};
  RolloutBatch batch = manual_batch(rewards, values, {0, 0, 0, 1}, {kNan, kNan, kNan, 0.0});
  compute_gae(batch, GaeConfig{0.9, 0.0});
  for (int t = 0; t < 4; ++t) {
    const double v_next = t == 3 ? 0.0 : values[t + 1];
    const double not_term = t == 3 ? 0.0 : 1.0;
    const double delta = rewards[t] + 0.9 * v_next * not_term - values[t];
    CHECK(batch.advantages[t] == doctest::Approx(delta).epsilon(1e-15));
    CHECK(batch.returns[t] == doctest::Approx(delta + values[t]).epsilon(1e-15));
  }
}

TEST_CASE("compute_gae: gamma = lambda = 1 with zero values telescopes to reward-to-go") {
  RolloutBatch batch =
      manual_batch({0, 0, 0, 1}, {0, 0, 0, 0}, {0, 0, 0, 1}, {kNan, kNan, kNan, 0.0});
  compute_gae(batch, GaeConfig{1.0, 1.0});
  for (int t = 0; t < 4; ++t) CHECK(batch.advantages[t] == 1.0);
}

TEST_CASE("compute_gae: missing bootstrap value is a usage error") {
  RolloutBatch batch = manual_batch({1, 1}, {0, 0}, {0, 0}, {kNan, kNan});
  CHECK_THROWS_AS(compute_gae(batch, GaeConfig{0.9, 0.9}), UsageError);
}

TEST_CASE("compute_gae: corridor recursion matches the direct summation oracle") {
  // Collect under the exactly-uniform policy, then substitute exact tabular
  // values so both sides share one V.
  const PolicyParams params = uniform_corridor_params();
  auto env = make_env("corridor");
  const std::array<double, 4> p_right = {0.5, 0.5, 0.5, 0.5};

  for (auto [gamma, lam] : std::vector<std::pair<double, double>>{
           {0.9, 0.95}, {1.0, 1.0}, {0.99, 0.0}}) {
    auto envs = corridor_fleet(2);
    RolloutBatch batch = collect(params, envs, 40, 2024);
    const auto v_exact = exact_values(*env, p_right, gamma);

    for (int slot = 0; slot < batch.size(); ++slot) {
      const int cell = cell_of(batch, slot);
      batch.old_value[slot] = v_exact[cell];
      if (batch.done[slot] || (slot % batch.horizon) + 1 == batch.horizon) {
        // Corridor dynamics are deterministic; recover the next cell.
        const int next_cell = batch.actions[slot].index == 1 ? std::min(cell + 1, 4)
                                                             : std::max(cell - 1, 0);
        batch.next_value[slot] = v_exact[next_cell];
      } else {
        batch.next_value[slot] = kNan;
      }
    }

    compute_gae(batch, GaeConfig{gamma, lam});

    // Independent oracle: deltas from raw arrays, then the forward sum
    // A_t = sum_k (gamma*lam)^k * prod_{j<k} (1 - term_{t+j}) * delta_{t+k}.
    const int horizon = batch.horizon;
    for (int actor = 0; actor < batch.num_actors; ++actor) {
      std::vector<double> delta(horizon);
      for (int t = 0; t < horizon; ++t) {
        const int slot = actor * horizon + t;
        double v_next = 0.0;
        if (!batch.terminal[slot]) {
          v_next = (batch.done[slot] || t + 1 == horizon) ? batch.next_value[slot]
                                                          : batch.old_value[slot + 1];
        }
        delta[t] = batch.rewards[slot] + gamma * v_next * (batch.terminal[slot] ? 0.0 : 1.0) -
                   batch.old_value[slot];
      }
      for (int t = 0; t < horizon; ++t) {
        double expected = 0.0;
        double weight = 1.0;
        for (int k = t; k < horizon; ++k) {
          expected += weight * delta[k];
          if (batch.terminal[actor * horizon + k]) break;
          weight *= gamma * lam;
        }
        CHECK(std::fabs(batch.advantages[actor * horizon + t] - expected) < 1e-10);
      }
    }
  }
}

TEST_CASE("compute_gae: invariant to actor ordering") {
  const PolicyParams params = uniform_corridor_params();
  auto envs = corridor_fleet(3);
  RolloutBatch batch = collect(params, envs, 25, 77);
  compute_gae(batch, GaeConfig{0.97, 0.9});

  // Swap actor blocks 0 and 2 and recompute.
  RolloutBatch swapped = batch;
  const int horizon = batch.horizon;
  auto swap_block = [&](auto& dst, const auto& src, int per_slot) {
    for (int t = 0; t < horizon * per_slot; ++t) {
      dst[0 * horizon * per_slot + t] = src[2 * horizon * per_slot + t];
      dst[2 * horizon * per_slot + t] = src[0 * horizon * per_slot + t];
    }
  };
  swap_block(swapped.states, batch.states, batch.obs_dim);
  swap_block(swapped.rewards, batch.rewards, 1);
  swap_block(swapped.done, batch.done, 1);
  swap_block(swapped.timeout, batch.timeout, 1);
  swap_block(swapped.terminal, batch.terminal, 1);
  swap_block(swapped.old_value, batch.old_value, 1);
  swap_block(swapped.next_value, batch.next_value, 1);
  compute_gae(swapped, GaeConfig{0.97, 0.9});
  for (int t = 0; t < horizon; ++t) {
    CHECK(swapped.advantages[t] == batch.advantages[2 * horizon + t]);
    CHECK(swapped.advantages[2 * horizon + t] == batch.advantages[t]);
    CHECK(swapped.advantages[horizon + t] == batch.advantages[horizon + t]);
  }
}

TEST_CASE("deltas have near-zero mean under exact on-policy values") {
  const PolicyParams params = uniform_corridor_params();
  auto envs = corridor_fleet(4);
  auto env = make_env("corridor");
  const auto v_exact = exact_values(*env, {0.5, 0.5, 0.5, 0.5}, 0.9);

  const RolloutBatch batch = collect(params, envs, 2500, 31415);
  REQUIRE(batch.size() == 10000);
  // Recompute every delta from raw data and the known corridor dynamics.
  double sum = 0.0;
  for (int slot = 0; slot < batch.size(); ++slot) {
    const int cell = cell_of(batch, slot);
    const int next_cell = batch.actions[slot].index == 1 ? std::min(cell + 1, 4)
                                                         : std::max(cell - 1, 0);
    const double not_term = batch.terminal[slot] ? 0.0 : 1.0;
    sum += batch.rewards[slot] + 0.9 * v_exact[next_cell] * not_term - v_exact[cell];
  }
  CHECK(std::fabs(sum / batch.size()) < 0.05);
}

TEST_CASE("minibatches: partition covers every index exactly once") {
  const auto sets = minibatches(8, 4, 99);
  REQUIRE(sets.size() == 2);
  std::vector<int> seen(8, 0);
  for (const auto& set : sets) {
    CHECK(set.size() == 4);
    for (int i : set) seen[i] += 1;
  }
  for (int count : seen) CHECK(count == 1);

  const auto one = minibatches(8, 8, 4);
  REQUIRE(one.size() == 1);
  CHECK(one[0].size() == 8);

  CHECK(minibatches(8, 4, 123) == minibatches(8, 4, 123));
  CHECK_THROWS_AS(minibatches(8, 3, 0), ConfigError);
  CHECK_THROWS_AS(minibatches(8, 16, 0), ConfigError);
}

TEST_CASE("make_slice: advantages normalized to mean 0, std 1 at serve time") {
  PolicyParams params = make_policy_params(HeadKind::categorical, 3, 2, 10, 4);
  RolloutBatch batch = synthetic_batch(params, 32, 5);
  const BatchSlice slice = make_slice(batch, all_indices(32));
  double mean = 0.0;
  for (double a : slice.norm_adv) mean += a;
  mean /= 32.0;
  double var = 0.0;
  for (double a : slice.norm_adv) var += (a - mean) * (a - mean);
  var /= 32.0;
  CHECK(std::fabs(mean) < 1e-12);
  CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-10));

  // Constant advantages hit the std floor and normalize to zero.
  for (auto& a : batch.advantages) a = 3.0;
  const BatchSlice flat = make_slice(batch, all_indices(32));
  for (double a : flat.norm_adv) CHECK(a == 0.0);
}
