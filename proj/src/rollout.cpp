#include "ppob/rollout.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace ppob {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
}

ActionDistribution RolloutBatch::old_dist_at(int slot) const {
  if (head == HeadKind::categorical) {
    std::vector<double> probs(old_probs.begin() + static_cast<std::size_t>(slot) * act_dim,
                              old_probs.begin() + static_cast<std::size_t>(slot + 1) * act_dim);
    // Rebuild the categorical from stored probabilities via log.
    std::vector<double> logits(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i)
      logits[i] = probs[i] > 0.0 ? std::log(probs[i]) : -745.0;
    return make_categorical(std::move(logits));
  }
  std::vector<double> mean(old_mean.begin() + static_cast<std::size_t>(slot) * act_dim,
                           old_mean.begin() + static_cast<std::size_t>(slot + 1) * act_dim);
  return make_diag_gaussian(std::move(mean), old_log_std);
}

RolloutBatch collect(const PolicyParams& old_params, std::vector<std::unique_ptr<Env>>& envs,
                     int horizon, std::uint64_t seed,
                     std::vector<double>* episode_return_acc) {
  if (envs.empty() || horizon < 1) throw UsageError("collect: need N >= 1 actors and T >= 1");
  const int num_actors = static_cast<int>(envs.size());
  const int total = num_actors * horizon;

  RolloutBatch batch;
  batch.head = old_params.head;
  batch.obs_dim = old_params.obs_dim;
  batch.act_dim = old_params.act_dim;
  batch.num_actors = num_actors;
  batch.horizon = horizon;
  batch.states.resize(static_cast<std::size_t>(total) * batch.obs_dim);
  batch.actions.resize(total);
  batch.rewards.assign(total, 0.0);
  batch.done.assign(total, 0);
  batch.timeout.assign(total, 0);
  batch.terminal.assign(total, 0);
  batch.old_log_prob.assign(total, 0.0);
  batch.old_prob_at_action.assign(total, 0.0);
  batch.old_value.assign(total, 0.0);
  batch.next_value.assign(total, kNan);
  if (batch.head == HeadKind::categorical) {
    batch.old_probs.assign(static_cast<std::size_t>(total) * batch.act_dim, 0.0);
  } else {
    batch.old_mean.assign(static_cast<std::size_t>(total) * batch.act_dim, 0.0);
    batch.old_log_std = old_params.log_std;
  }
  batch.advantages.assign(total, 0.0);
  batch.returns.assign(total, 0.0);

  std::vector<double> return_acc(num_actors, 0.0);
  if (episode_return_acc && static_cast<int>(episode_return_acc->size()) == num_actors)
    return_acc = *episode_return_acc;

  Rng base(seed);
  for (int actor = 0; actor < num_actors; ++actor) {
    Rng rng = base.fork(static_cast<std::uint64_t>(actor));
    Env& env = *envs[actor];
    try {
      std::vector<double> current;
      if (env.episode_done()) {
        current = env.reset(rng.next_u64());
        return_acc[actor] = 0.0;
      } else {
        current = env.observe();
      }
      for (int t = 0; t < horizon; ++t) {
        const int slot = actor * horizon + t;
        auto [dist, value] = forward(old_params, current);
        const Action action = sample(dist, rng);
        const double lp = log_prob(dist, action);

        for (int d = 0; d < batch.obs_dim; ++d)
          batch.states[static_cast<std::size_t>(slot) * batch.obs_dim + d] = current[d];
        batch.actions[slot] = action;
        batch.old_log_prob[slot] = lp;
        batch.old_prob_at_action[slot] = std::exp(lp);
        batch.old_value[slot] = value;
        if (batch.head == HeadKind::categorical) {
          const auto& c = std::get<Categorical>(dist);
          for (int d = 0; d < batch.act_dim; ++d)
            batch.old_probs[static_cast<std::size_t>(slot) * batch.act_dim + d] = c.probs[d];
        } else {
          const auto& g = std::get<DiagGaussian>(dist);
          for (int d = 0; d < batch.act_dim; ++d)
            batch.old_mean[static_cast<std::size_t>(slot) * batch.act_dim + d] = g.mean[d];
        }

        Transition tr = env.step(action);
        batch.rewards[slot] = tr.reward;
        batch.done[slot] = tr.done ? 1 : 0;
        batch.timeout[slot] = tr.timeout ? 1 : 0;
        batch.terminal[slot] = (tr.done && !tr.timeout) ? 1 : 0;
        return_acc[actor] += tr.reward;

        const bool horizon_end = (t + 1 == horizon);
        if (tr.done || horizon_end) {
          // Bootstrap value of the state the episode actually reached,
          // recorded before any reset. Unused when terminal.
          auto [ignored, boot] = forward(old_params, tr.next_state);
          (void)ignored;
          batch.next_value[slot] = boot;
        }
        if (tr.done) {
          batch.completed_episode_returns.push_back(return_acc[actor]);
          return_acc[actor] = 0.0;
          current = env.reset(rng.next_u64());
        } else {
          current = tr.next_state;
        }
      }
    } catch (const NumericFault& fault) {
      throw NumericFault("collect: actor " + std::to_string(actor) + ": " + fault.what());
    } catch (const UsageError& fault) {
      throw UsageError("collect: actor " + std::to_string(actor) + ": " + fault.what());
    }
  }
  if (episode_return_acc) *episode_return_acc = return_acc;
  return batch;
}

void compute_gae(RolloutBatch& batch, const GaeConfig& gae) {
  if (gae.gamma < 0.0 || gae.gamma > 1.0 || gae.lam < 0.0 || gae.lam > 1.0)
    throw ConfigError("compute_gae: gamma and lambda must lie in [0, 1]");
  const int horizon = batch.horizon;
  for (int actor = 0; actor < batch.num_actors; ++actor) {
    double running = 0.0;
    for (int t = horizon - 1; t >= 0; --t) {
      const int slot = actor * horizon + t;
      const bool term = batch.terminal[slot] != 0;
      double v_next = 0.0;
      if (!term) {
        if (batch.done[slot] || t + 1 == horizon) {
          v_next = batch.next_value[slot];
          if (!std::isfinite(v_next))
            throw UsageError("compute_gae: missing bootstrap value at slot " +
                             std::to_string(slot));
        } else {
          v_next = batch.old_value[slot + 1];
        }
      }
      const double not_term = term ? 0.0 : 1.0;
      const double delta =
          batch.rewards[slot] + gae.gamma * v_next * not_term - batch.old_value[slot];
      running = delta + gae.gamma * gae.lam * not_term * running;
      batch.advantages[slot] = running;
      batch.returns[slot] = running + batch.old_value[slot];
      check_finite(batch.advantages[slot], "advantage");
    }
  }
  batch.advantages_ready = true;
}

std::vector<std::vector<int>> minibatches(int batch_size, int minibatch_size,
                                          std::uint64_t epoch_seed) {
  if (minibatch_size < 1 || minibatch_size > batch_size)
    throw ConfigError("minibatches: M must satisfy 1 <= M <= N*T");
  if (batch_size % minibatch_size != 0)
    throw ConfigError("minibatches: M must divide N*T");
  std::vector<int> order(batch_size);
  for (int i = 0; i < batch_size; ++i) order[i] = i;
  Rng rng(epoch_seed);
  shuffle(order, rng);
  std::vector<std::vector<int>> sets;
  for (int start = 0; start < batch_size; start += minibatch_size)
    sets.emplace_back(order.begin() + start, order.begin() + start + minibatch_size);
  return sets;
}

BatchSlice make_slice(const RolloutBatch& batch, std::vector<int> idx, bool normalize) {
  if (!batch.advantages_ready) throw UsageError("make_slice: advantages not computed");
  BatchSlice slice;
  slice.batch = &batch;
  slice.idx = std::move(idx);
  slice.norm_adv.resize(slice.idx.size());
  for (std::size_t i = 0; i < slice.idx.size(); ++i)
    slice.norm_adv[i] = batch.advantages[slice.idx[i]];
  if (normalize && !slice.norm_adv.empty()) {
    double mean = 0.0;
    for (double a : slice.norm_adv) mean += a;
    mean /= static_cast<double>(slice.norm_adv.size());
    double var = 0.0;
    for (double a : slice.norm_adv) var += (a - mean) * (a - mean);
    var /= static_cast<double>(slice.norm_adv.size());
    const double denom = std::max(std::sqrt(var), 1e-8);
    for (double& a : slice.norm_adv) a = (a - mean) / denom;
  }
  return slice;
}

void dump_batch_csv(const RolloutBatch& batch, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw UsageError("dump_batch_csv: cannot open " + path);
  std::fprintf(f, "slot,actor,t");
  for (int d = 0; d < batch.obs_dim; ++d) std::fprintf(f, ",state%d", d);
  std::fprintf(f,
               ",action,reward,done,timeout,old_log_prob,old_prob,old_value,advantage,return\n");
  for (int slot = 0; slot < batch.size(); ++slot) {
    std::fprintf(f, "%d,%d,%d", slot, slot / batch.horizon, slot % batch.horizon);
    for (int d = 0; d < batch.obs_dim; ++d)
      std::fprintf(f, ",%s", fmt_double(batch.state_at(slot)[d]).c_str());
    if (batch.head == HeadKind::categorical) {
      std::fprintf(f, ",%d", batch.actions[slot].index);
    } else {
      std::string joined;
      for (std::size_t i = 0; i < batch.actions[slot].vec.size(); ++i)
        joined += (i ? ";" : "") + fmt_double(batch.actions[slot].vec[i]);
      std::fprintf(f, ",%s", joined.c_str());
    }
    std::fprintf(f, ",%s,%d,%d,%s,%s,%s,%s,%s\n", fmt_double(batch.rewards[slot]).c_str(),
                 batch.done[slot], batch.timeout[slot],
                 fmt_double(batch.old_log_prob[slot]).c_str(),
                 fmt_double(batch.old_prob_at_action[slot]).c_str(),
                 fmt_double(batch.old_value[slot]).c_str(),
                 fmt_double(batch.advantages[slot]).c_str(),
                 fmt_double(batch.returns[slot]).c_str());
  }
  std::fclose(f);
}

}  // namespace ppob
