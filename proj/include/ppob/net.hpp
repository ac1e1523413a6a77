#ifndef PPOB_NET_HPP_
#define PPOB_NET_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ppob/common.hpp"
#include "ppob/dist.hpp"

namespace ppob {

enum class HeadKind { categorical, diag_gaussian };

// Fully-connected layer, weights row-major [out x in].
struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;
  std::vector<double> b;
};

// Feedforward stack: tanh between layers, identity after the last.
struct Mlp {
  std::vector<DenseLayer> layers;
};

// Actor-critic parameters. Policy and value networks share no weights; the
// gaussian head keeps a state-independent trainable log-std vector.
struct PolicyParams {
  HeadKind head = HeadKind::categorical;
  int obs_dim = 0;
  int act_dim = 0;  // number of actions / action dimensions
  std::uint64_t init_seed = 0;
  Mlp policy;  // obs -> logits or mean
  Mlp value;   // obs -> scalar
  std::vector<double> log_std;  // gaussian only
};

// Accumulated d(loss)/d(parameter), shape-congruent with PolicyParams.
struct GradientTape {
  Mlp policy;
  Mlp value;
  std::vector<double> log_std;
};

// Two tanh hidden layers of the given width; scaled uniform init with gain
// 1.0 (hidden, value head) and 0.01 (policy head) so early ratios sit near 1.
PolicyParams make_policy_params(HeadKind head, int obs_dim, int act_dim, std::uint64_t seed,
                                int hidden_width = 64);

GradientTape zero_tape(const PolicyParams& params);
std::size_t param_count(const PolicyParams& params);

// Flattening follows a fixed canonical order (policy layers w,b; value
// layers w,b; log_std) shared by the optimizer and the checkpoint format.
std::vector<double> flatten(const PolicyParams& params);
std::vector<double> flatten(const GradientTape& tape);
void unflatten(const std::vector<double>& flat, PolicyParams& params);

// Post-activation values per layer; kept so backward can run without
// re-running forward.
struct MlpCache {
  std::vector<std::vector<double>> acts;  // acts[0] = input, acts[i] = layer i output
};

std::vector<double> mlp_forward(const Mlp& net, const std::vector<double>& input,
                                MlpCache* cache = nullptr);

// Accumulates gradients for d(loss)/d(output) into grad; cache must come
// from a forward pass over the same net and input.
void mlp_backward(const Mlp& net, const MlpCache& cache, const std::vector<double>& d_output,
                  Mlp& grad);

// Policy distribution and value estimate at one state. Pure: identical
// inputs give bitwise-identical outputs.
std::pair<ActionDistribution, double> forward(const PolicyParams& params,
                                              const std::vector<double>& state);

struct OptimizerState {
  enum class Algo { adam, sgd };
  Algo algo = Algo::adam;
  double step_size = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-5;
  long long step_count = 0;
  std::vector<double> m;  // first moment, flattened param order
  std::vector<double> v;  // second moment
};

OptimizerState make_optimizer(OptimizerState::Algo algo, double step_size,
                              const PolicyParams& params);

// Descent step on the tape (maximization objectives are negated into losses
// before backward). step_scale multiplies the step size (annealing).
void optimizer_step(PolicyParams& params, const GradientTape& tape, OptimizerState& opt,
                    double step_scale = 1.0);

// Plain-text checkpoint: shapes + row-major hexfloat values + init seed.
// Round-trips bit-exactly.
void save_checkpoint(const PolicyParams& params, const std::string& path);
PolicyParams load_checkpoint(const std::string& path);

}  // namespace ppob

#endif  // PPOB_NET_HPP_
