#ifndef PPOB_DIST_HPP_
#define PPOB_DIST_HPP_

#include <variant>
#include <vector>

#include "ppob/common.hpp"

namespace ppob {

// Discrete action index or continuous action vector, depending on the head.
struct Action {
  int index = -1;
  std::vector<double> vec;
};

// Softmax of logits; probs/log_probs are derived once at construction.
struct Categorical {
  std::vector<double> logits;
  std::vector<double> probs;
  std::vector<double> log_probs;
};

struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> log_std;
  std::vector<double> std_dev;  // exp(log_std), always > 0
};

using ActionDistribution = std::variant<Categorical, DiagGaussian>;

Categorical make_categorical(std::vector<double> logits);
DiagGaussian make_diag_gaussian(std::vector<double> mean, std::vector<double> log_std);

// ln pi(a); Gaussian case is the log density at the sampled action.
double log_prob(const ActionDistribution& dist, const Action& action);

// pi(a): probability mass (discrete) or density (continuous, may exceed 1).
double prob_at(const ActionDistribution& dist, const Action& action);

double entropy(const ActionDistribution& dist);

// KL(first || second): sum_x p_first ln(p_first / p_second). Both arguments
// must be the same family and dimension.
double kl_divergence(const ActionDistribution& from, const ActionDistribution& to);

Action sample(const ActionDistribution& dist, Rng& rng);

// Deterministic action: argmax probability / mean.
Action mode(const ActionDistribution& dist);

int action_dim(const ActionDistribution& dist);

// --- analytic derivatives w.r.t. the head outputs -------------------------
//
// "head" is the vector the policy network emits: logits (categorical) or the
// mean (gaussian). Gaussian log-std is a separate parameter vector; the
// *_dlogstd variants return its gradient (empty for categorical).

std::vector<double> dlogprob_dhead(const ActionDistribution& dist, const Action& action);
std::vector<double> dlogprob_dlogstd(const ActionDistribution& dist, const Action& action);

std::vector<double> dentropy_dhead(const ActionDistribution& dist);
std::vector<double> dentropy_dlogstd(const ActionDistribution& dist);

struct DistGrad {
  std::vector<double> dhead;
  std::vector<double> dlogstd;
};

// Gradient of KL(old || new) w.r.t. the NEW distribution's parameters.
DistGrad dkl_old_new_dnew(const ActionDistribution& old_dist, const ActionDistribution& new_dist);

// Gradient of KL(new || old) w.r.t. the NEW distribution's parameters.
DistGrad dkl_new_old_dnew(const ActionDistribution& new_dist, const ActionDistribution& old_dist);

}  // namespace ppob

#endif  // PPOB_DIST_HPP_
