#ifndef PPOB_TRAINER_HPP_
#define PPOB_TRAINER_HPP_

#include <map>
#include <string>
#include <vector>

#include "ppob/envs.hpp"
#include "ppob/net.hpp"
#include "ppob/objectives.hpp"
#include "ppob/rollout.hpp"

namespace ppob {

struct TrainerConfig {
  std::string env_id = "corridor";
  std::string preset;        // resolved preset name, informational
  int iterations = 200;      // L
  int actors = 4;            // N
  int horizon = 32;          // T
  int epochs = 3;            // K
  int minibatch = 32;        // M, must divide N*T
  double gamma = 0.99;
  double lam = 0.95;
  double step_size = 3e-3;
  bool anneal = false;          // linear 1 -> 0 step-size decay
  bool anneal_epsilon = false;  // clip radius decay (Atari-style clip runs)
  bool anneal_entropy = false;  // entropy coefficient decay (Atari-style barrier runs)
  ObjectiveConfig objective;
  int eval_every = 1;
  int eval_episodes = 4;
  std::uint64_t seed = 0;
  bool dump_batches = false;
  int hidden_width = 64;
  std::string out_dir;  // artifacts land here when non-empty
};

void validate(const TrainerConfig& cfg);

struct MetricsRow {
  int iteration = 0;      // 1-based
  long long steps = 0;    // iteration * N * T
  double train_return = 0.0;
  double eval_return = 0.0;
  double mean_kl = 0.0;
  double mean_ad = 0.0;
  long long violations = 0;
  double beta = 0.0;
  double alpha = 0.0;
};

struct RunMetrics {
  std::vector<MetricsRow> rows;
  long long total_samples = 0;
  long long total_violations = 0;
};

struct TrainResult {
  PolicyParams params;
  RunMetrics metrics;
};

// Algorithm outer loop: L iterations of collect -> GAE -> K epochs of
// minibatch steps, parameters frozen as theta_old for the whole iteration.
TrainResult train(const TrainerConfig& cfg);

// Deterministic-action evaluation: argmax for categorical, mean for
// gaussian. Returns (mean return, per-episode returns). When given,
// first_episode_trace receives episode 0's transitions.
std::pair<double, std::vector<double>> evaluate(const PolicyParams& params, Env& env,
                                                int episodes, std::uint64_t seed,
                                                std::vector<Transition>* first_episode_trace =
                                                    nullptr);

// One trained run's evaluation stream, input to the scorecard.
struct RunRecord {
  std::string algorithm;
  std::string env;
  std::uint64_t seed = 0;
  std::vector<double> eval_returns;  // per iteration, NaN before first eval
};

struct Scorecard {
  std::vector<std::string> algorithms;
  std::vector<std::string> envs;
  std::map<std::string, std::map<std::string, double>> reward_100;  // env -> algorithm
  std::map<std::string, std::map<std::string, double>> reward_all;
  std::map<std::string, int> wins_100;
  std::map<std::string, int> wins_all;
  std::string to_text() const;
};

// Mirrors the won-count comparison: reward_100 averages the final window
// (last 10 rows) of the seed-averaged eval stream, reward_all the whole
// stream. Strictly-best algorithm per environment takes the win; exact ties
// award neither.
Scorecard scorecard(const std::vector<RunRecord>& runs);

extern const char kMetricsHeader[];
void write_metrics_csv(const RunMetrics& metrics, const std::string& path);

}  // namespace ppob

#endif  // PPOB_TRAINER_HPP_
