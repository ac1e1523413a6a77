#ifndef PPOB_ROLLOUT_HPP_
#define PPOB_ROLLOUT_HPP_

#include <memory>
#include <vector>

#include "ppob/envs.hpp"
#include "ppob/net.hpp"

namespace ppob {

struct GaeConfig {
  double gamma = 0.99;
  double lam = 0.95;
};

// Transitions from N actors over T steps each, actor-contiguous
// (slot = actor * T + t). Everything stamped "old_" is recorded under the
// collection-time policy and never recomputed.
struct RolloutBatch {
  HeadKind head = HeadKind::categorical;
  int obs_dim = 0;
  int act_dim = 0;
  int num_actors = 0;
  int horizon = 0;

  std::vector<double> states;  // (N*T) x obs_dim, row-major
  std::vector<Action> actions;
  std::vector<double> rewards;
  std::vector<std::uint8_t> done;
  std::vector<std::uint8_t> timeout;
  std::vector<std::uint8_t> terminal;  // done and not timeout

  std::vector<double> old_log_prob;
  std::vector<double> old_prob_at_action;
  std::vector<double> old_value;
  // V(s_{t+1}) where the next slot cannot supply it (episode end or horizon
  // cut); NaN elsewhere. compute_gae reads old_value[slot+1] in between.
  std::vector<double> next_value;

  // Collection-time distribution snapshot, needed by the KL objectives.
  std::vector<double> old_probs;  // categorical: (N*T) x act_dim
  std::vector<double> old_mean;   // gaussian: (N*T) x act_dim
  std::vector<double> old_log_std;  // gaussian: act_dim (state-independent)

  std::vector<double> advantages;
  std::vector<double> returns;
  bool advantages_ready = false;

  // Returns of episodes that finished during this collection.
  std::vector<double> completed_episode_returns;

  int size() const { return num_actors * horizon; }
  const double* state_at(int slot) const { return &states[static_cast<std::size_t>(slot) * obs_dim]; }
  ActionDistribution old_dist_at(int slot) const;
};

// Runs the N envs for T steps under frozen params. Envs keep their episode
// state across calls; episodes ending mid-horizon reset from the actor's
// seed stream and continue. episode_return_acc carries partial episode
// returns across collect calls (one slot per actor).
RolloutBatch collect(const PolicyParams& old_params, std::vector<std::unique_ptr<Env>>& envs,
                     int horizon, std::uint64_t seed,
                     std::vector<double>* episode_return_acc = nullptr);

// delta_t = r_t + gamma * V(s_{t+1}) * (1 - terminal_t) - V(s_t)
// A_t = delta_t + gamma * lam * (1 - terminal_t) * A_{t+1}, backwards per
// actor. Timeouts bootstrap through V(s_{t+1}); only real terminations cut.
void compute_gae(RolloutBatch& batch, const GaeConfig& gae);

// Seeded shuffle of all N*T indices partitioned into N*T/M sets.
std::vector<std::vector<int>> minibatches(int batch_size, int minibatch_size,
                                          std::uint64_t epoch_seed);

// A minibatch view with advantages normalized to mean 0, std 1 at serve
// time (std floor 1e-8).
struct BatchSlice {
  const RolloutBatch* batch = nullptr;
  std::vector<int> idx;
  std::vector<double> norm_adv;
  int size() const { return static_cast<int>(idx.size()); }
};

BatchSlice make_slice(const RolloutBatch& batch, std::vector<int> idx, bool normalize = true);

void dump_batch_csv(const RolloutBatch& batch, const std::string& path);

}  // namespace ppob

#endif  // PPOB_ROLLOUT_HPP_
