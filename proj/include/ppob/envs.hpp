#ifndef PPOB_ENVS_HPP_
#define PPOB_ENVS_HPP_

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "ppob/common.hpp"
#include "ppob/dist.hpp"

namespace ppob {

struct ActionSpace {
  bool discrete = true;
  int n = 0;       // discrete
  int dim = 0;     // continuous
  double low = 0.0;
  double high = 0.0;
};

struct EnvSpec {
  std::string id;
  int observation_dim = 0;
  ActionSpace action_space;
  int max_episode_steps = 0;
};

struct Transition {
  std::vector<double> state;
  Action action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
  bool timeout = false;  // cut by the step limit; implies done
};

// Seedable, deterministic episode generator. Stepping a finished episode is
// a usage error; callers reset explicitly.
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual Transition step(const Action& action) = 0;
  virtual bool episode_done() const = 0;
  // Current observation, valid while an episode is live.
  virtual std::vector<double> observe() const = 0;
};

// ids: corridor | cartpole | pendulum
std::unique_ptr<Env> make_env(const std::string& id);

// Exact state values for the 5-cell corridor. Optimal (always-right) values
// are gamma^(3-k) for cells k <= 3; the tabular-policy variant solves
// (I - gamma P) V = R directly. p_right[k] is the probability of moving
// right in cell k. The terminal cell's value is 0.
std::array<double, 5> corridor_optimal_values(double gamma);
std::array<double, 5> corridor_policy_values(const std::array<double, 4>& p_right, double gamma);

// Checked entry point: errors unless env is the corridor.
std::array<double, 5> exact_values(const Env& env, double gamma);
std::array<double, 5> exact_values(const Env& env, const std::array<double, 4>& p_right,
                                   double gamma);

// Episode trace rows: t, state..., action, reward, done.
void write_trace_csv(const std::vector<Transition>& episode, const std::string& path);

}  // namespace ppob

#endif  // PPOB_ENVS_HPP_
