#ifndef PPOB_TESTS_TEST_UTIL_HPP_
#define PPOB_TESTS_TEST_UTIL_HPP_

#include <cmath>
#include <functional>
#include <vector>

#include "ppob/net.hpp"
#include "ppob/rollout.hpp"

namespace ppob::testutil {

// Central finite differences over every parameter, h = 1e-5. Independent
// oracle for every analytic gradient in the library.
inline std::vector<double> fd_gradient(const PolicyParams& params,
                                       const std::function<double(const PolicyParams&)>& fn,
                                       double h = 1e-5) {
  std::vector<double> flat = flatten(params);
  std::vector<double> grad(flat.size());
  PolicyParams work = params;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    std::vector<double> bumped = flat;
    bumped[i] = flat[i] + h;
    unflatten(bumped, work);
    const double up = fn(work);
    bumped[i] = flat[i] - h;
    unflatten(bumped, work);
    const double down = fn(work);
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Largest relative error between analytic and finite-difference entries,
// restricted to |fd| > threshold.
inline double max_rel_error(const std::vector<double>& analytic, const std::vector<double>& fd,
                            double threshold = 1e-8) {
  double worst = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    if (std::fabs(fd[i]) <= threshold) continue;
    worst = std::max(worst, std::fabs(analytic[i] - fd[i]) / std::fabs(fd[i]));
  }
  return worst;
}

// A collection-shaped batch with random states, actions sampled from
// params_old, and random advantages/returns. No environment involved.
inline RolloutBatch synthetic_batch(const PolicyParams& params_old, int n, std::uint64_t seed) {
  RolloutBatch batch;
  batch.head = params_old.head;
  batch.obs_dim = params_old.obs_dim;
  batch.act_dim = params_old.act_dim;
  batch.num_actors = 1;
  batch.horizon = n;
  batch.states.resize(static_cast<std::size_t>(n) * batch.obs_dim);
  batch.actions.resize(n);
  batch.rewards.assign(n, 0.0);
  batch.done.assign(n, 0);
  batch.timeout.assign(n, 0);
  batch.terminal.assign(n, 0);
  batch.old_log_prob.assign(n, 0.0);
  batch.old_prob_at_action.assign(n, 0.0);
  batch.old_value.assign(n, 0.0);
  batch.next_value.assign(n, 0.0);
  if (batch.head == HeadKind::categorical) {
    batch.old_probs.assign(static_cast<std::size_t>(n) * batch.act_dim, 0.0);
  } else {
    batch.old_mean.assign(static_cast<std::size_t>(n) * batch.act_dim, 0.0);
    batch.old_log_std = params_old.log_std;
  }
  batch.advantages.assign(n, 0.0);
  batch.returns.assign(n, 0.0);

  Rng rng(seed);
  std::vector<double> state(batch.obs_dim);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < batch.obs_dim; ++d) {
      state[d] = rng.uniform(-1.0, 1.0);
      batch.states[static_cast<std::size_t>(i) * batch.obs_dim + d] = state[d];
    }
    auto [dist, value] = forward(params_old, state);
    const Action action = sample(dist, rng);
    batch.actions[i] = action;
    batch.old_log_prob[i] = log_prob(dist, action);
    batch.old_prob_at_action[i] = std::exp(batch.old_log_prob[i]);
    batch.old_value[i] = value;
    if (batch.head == HeadKind::categorical) {
      const auto& c = std::get<Categorical>(dist);
      for (int d = 0; d < batch.act_dim; ++d)
        batch.old_probs[static_cast<std::size_t>(i) * batch.act_dim + d] = c.probs[d];
    } else {
      const auto& g = std::get<DiagGaussian>(dist);
      for (int d = 0; d < batch.act_dim; ++d)
        batch.old_mean[static_cast<std::size_t>(i) * batch.act_dim + d] = g.mean[d];
    }
    batch.advantages[i] = rng.normal();
    batch.returns[i] = rng.normal();
  }
  batch.advantages_ready = true;
  return batch;
}

inline std::vector<int> all_indices(int n) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

// Nudges every parameter so the new policy differs from the collection
// policy while staying well inside the barrier radius.
inline PolicyParams perturbed(const PolicyParams& params, double scale, std::uint64_t seed) {
  PolicyParams out = params;
  std::vector<double> flat = flatten(out);
  Rng rng(seed);
  for (double& x : flat) x += scale * rng.uniform(-1.0, 1.0);
  unflatten(flat, out);
  return out;
}

}  // namespace ppob::testutil

#endif  // PPOB_TESTS_TEST_UTIL_HPP_
