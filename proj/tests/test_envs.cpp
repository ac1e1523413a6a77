#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ppob/envs.hpp"

using namespace ppob;

namespace {

Action discrete(int i) {
  Action a;
  a.index = i;
  return a;
}

Action torque(double u) {
  Action a;
  a.vec = {u};
  return a;
}

}  // namespace

TEST_CASE("corridor: fixed start, wall clamp, terminal reward") {
  auto env = make_env("corridor");
  auto state = env->reset(123);
  CHECK(state == std::vector<double>{1, 0, 0, 0, 0});

  // Left against the wall stays in cell 0 with zero reward.
  Transition tr = env->step(discrete(0));
  CHECK(tr.next_state == std::vector<double>{1, 0, 0, 0, 0});
  CHECK(tr.reward == 0.0);
  CHECK_FALSE(tr.done);

  // March right: reward lands on entering the last cell.
  for (int i = 0; i < 3; ++i) {
    tr = env->step(discrete(1));
    CHECK(tr.reward == 0.0);
    CHECK_FALSE(tr.done);
  }
  tr = env->step(discrete(1));
  CHECK(tr.reward == 1.0);
  CHECK(tr.done);
  CHECK_FALSE(tr.timeout);
  CHECK_THROWS_AS(env->step(discrete(1)), UsageError);
}

TEST_CASE("corridor: always-right returns 1 in exactly 4 steps") {
  auto env = make_env("corridor");
  env->reset(0);
  double total = 0.0;
  int steps = 0;
  while (!env->episode_done()) {
    total += env->step(discrete(1)).reward;
    ++steps;
  }
  CHECK(total == 1.0);
  CHECK(steps == 4);
}

TEST_CASE("corridor: step limit sets timeout, not terminal") {
  auto env = make_env("corridor");
  env->reset(0);
  Transition tr;
  for (int i = 0; i < 20; ++i) tr = env->step(discrete(0));
  CHECK(tr.done);
  CHECK(tr.timeout);
}

TEST_CASE("cartpole: reset is seed-deterministic") {
  auto env = make_env("cartpole");
  const auto s1 = env->reset(99);
  const auto s2 = env->reset(99);
  CHECK(s1 == s2);
  const auto s3 = env->reset(100);
  CHECK(s1 != s3);
  for (double v : s1) {
    CHECK(v >= -0.05);
    CHECK(v <= 0.05);
  }
}

TEST_CASE("cartpole: one euler step from the zero state, hand-computed") {
  auto env = make_env("cartpole");
  env->reset(0);
  // Force the exact zero state regardless of the seeded draw.
  // A fresh reset draws tiny values; replicate the dynamics by hand from
  // whatever state reset produced.
  const auto s0 = env->observe();
  const Transition tr = env->step(discrete(1));

  const double x = s0[0], x_dot = s0[1], theta = s0[2], theta_dot = s0[3];
  const double force = 10.0;
  const double costheta = std::cos(theta), sintheta = std::sin(theta);
  const double total_mass = 1.1, masspole = 0.1, length = 0.5, polemass_length = 0.05;
  const double temp = (force + polemass_length * theta_dot * theta_dot * sintheta) / total_mass;
  const double theta_acc = (9.8 * sintheta - costheta * temp) /
                           (length * (4.0 / 3.0 - masspole * costheta * costheta / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * costheta / total_mass;

  CHECK(tr.next_state[0] == doctest::Approx(x + 0.02 * x_dot).epsilon(1e-12));
  CHECK(tr.next_state[1] == doctest::Approx(x_dot + 0.02 * x_acc).epsilon(1e-12));
  CHECK(tr.next_state[2] == doctest::Approx(theta + 0.02 * theta_dot).epsilon(1e-12));
  CHECK(tr.next_state[3] == doctest::Approx(theta_dot + 0.02 * theta_acc).epsilon(1e-12));
  CHECK(tr.reward == 1.0);
}

TEST_CASE("cartpole: reward is exactly 1 per step until failure") {
  auto env = make_env("cartpole");
  env->reset(7);
  int steps = 0;
  while (!env->episode_done()) {
    // Constant pushes topple the pole quickly.
    const Transition tr = env->step(discrete(1));
    CHECK(tr.reward == 1.0);
    ++steps;
    REQUIRE(steps <= 500);
  }
  CHECK(steps < 500);  // fell over, no timeout
}

TEST_CASE("pendulum: seeded init range and non-positive rewards") {
  auto env = make_env("pendulum");
  const auto s1 = env->reset(4);
  const auto s2 = env->reset(4);
  CHECK(s1 == s2);
  CHECK(s1.size() == 3);
  CHECK(std::fabs(s1[0] * s1[0] + s1[1] * s1[1] - 1.0) < 1e-12);  // (cos, sin)
  CHECK(std::fabs(s1[2]) <= 1.0 / 8.0);

  double last_reward = 0.0;
  int steps = 0;
  while (!env->episode_done()) {
    const Transition tr = env->step(torque(1.5));
    CHECK(tr.reward <= 0.0);
    last_reward = tr.reward;
    ++steps;
  }
  (void)last_reward;
  CHECK(steps == 200);
}

TEST_CASE("environments: same seed and action sequence give identical trajectories") {
  for (const char* id : {"corridor", "cartpole", "pendulum"}) {
    auto env_a = make_env(id);
    auto env_b = make_env(id);
    const bool discrete_env = env_a->spec().action_space.discrete;
    CHECK(env_a->reset(31) == env_b->reset(31));
    Rng rng(17);
    for (int t = 0; t < 30 && !env_a->episode_done(); ++t) {
      Action act = discrete_env ? discrete(static_cast<int>(rng.index(2)))
                                : torque(rng.uniform(-2.0, 2.0));
      const Transition ta = env_a->step(act);
      const Transition tb = env_b->step(act);
      CHECK(ta.next_state == tb.next_state);
      CHECK(ta.reward == tb.reward);
      CHECK(ta.done == tb.done);
      if (ta.done) break;
    }
  }
}

TEST_CASE("exact_values: optimal corridor values are gamma powers") {
  auto env = make_env("corridor");
  const auto v1 = exact_values(*env, 1.0);
  for (int k = 0; k <= 3; ++k) CHECK(v1[k] == 1.0);
  CHECK(v1[4] == 0.0);

  const auto v05 = exact_values(*env, 0.5);
  CHECK(v05[0] == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(v05[3] == 1.0);

  auto cart = make_env("cartpole");
  CHECK_THROWS_AS(exact_values(*cart, 0.9), UsageError);
}

TEST_CASE("exact_values: tabular-policy linear solve satisfies the Bellman equations") {
  auto env = make_env("corridor");
  const std::array<double, 4> p_right = {0.5, 0.5, 0.5, 0.5};
  const double gamma = 0.9;
  const auto v = exact_values(*env, p_right, gamma);
  // Bellman residual at every non-terminal cell must vanish.
  for (int s = 0; s < 4; ++s) {
    const int left = std::max(s - 1, 0);
    const double right_value = (s == 3) ? 1.0 : gamma * v[s + 1];
    const double expected = p_right[s] * right_value + (1 - p_right[s]) * gamma * v[left];
    CHECK(v[s] == doctest::Approx(expected).epsilon(1e-12));
  }
  // And the optimal policy reduces to the closed form.
  const auto v_opt = exact_values(*env, {1.0, 1.0, 1.0, 1.0}, gamma);
  for (int k = 0; k <= 3; ++k)
    CHECK(v_opt[k] == doctest::Approx(std::pow(gamma, 3 - k)).epsilon(1e-12));
}
