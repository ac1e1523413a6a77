#ifndef PPOB_OBJECTIVES_HPP_
#define PPOB_OBJECTIVES_HPP_

#include <string>

#include "ppob/net.hpp"
#include "ppob/rollout.hpp"

namespace ppob {

enum class ObjectiveKind { clip, klpen, klbar, adbar };

ObjectiveKind objective_kind_from_string(const std::string& name);
std::string to_string(ObjectiveKind kind);

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::adbar;
  double epsilon = 0.2;        // clip radius
  double beta = 1.0;           // KL penalty coefficient (adaptive for klpen)
  double d_targ = 0.01;        // adaptive-KL target
  double mu = 1.0;             // barrier coefficient
  double delta = 0.5;          // barrier radius
  double vf_coeff = 1.0;
  double entropy_coeff = 0.01;
  double barrier_floor = 1e-8;  // floor on the barrier's log argument
};

void validate(const ObjectiveConfig& cfg);

// Per-minibatch diagnostics. mean_kl is KL(old || new); mean_ad is the mean
// squared root-probability distance. violations counts samples whose
// monitored distance reached delta (log argument floored): the AD distance
// for clip/adbar, KL(new || old) for klbar, KL(old || new) for klpen.
struct ObjectiveReport {
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total_loss = 0.0;
  double mean_ratio = 0.0;
  double mean_kl = 0.0;
  double mean_ad = 0.0;
  int violations = 0;
  int ratio_clamps = 0;
  int sample_count = 0;
};

// exp(new_log_prob - old_log_prob), exponent clamped to [-30, 30]; the
// out-param counts clamps when supplied.
double ratio(double new_log_prob, double old_log_prob, int* clamped = nullptr);

// (sqrt(p_new) - sqrt(p_old))^2; inputs are probabilities (discrete) or
// densities (continuous) and must be non-negative.
double ad_distance(double old_prob_at_action, double new_prob_at_action);

// Surrogate objectives, ascent form, mean over the slice. Each returns the
// scalar and fills the report's diagnostic fields if given.
double surrogate_clip(const BatchSlice& slice, const PolicyParams& params, double epsilon,
                      ObjectiveReport* report = nullptr);
double surrogate_klpen(const BatchSlice& slice, const PolicyParams& params, double beta,
                       ObjectiveReport* report = nullptr);
double surrogate_klbar(const BatchSlice& slice, const PolicyParams& params, double mu,
                       double delta, double barrier_floor = 1e-8,
                       ObjectiveReport* report = nullptr);
double surrogate_adbar(const BatchSlice& slice, const PolicyParams& params, double mu,
                       double delta, double barrier_floor = 1e-8,
                       ObjectiveReport* report = nullptr);

// loss = -surrogate + vf_coeff * mean((V - G)^2) - entropy_coeff * mean(H).
// When tape is non-null, d(loss)/d(params) is accumulated into it.
double total_loss(const BatchSlice& slice, const PolicyParams& params,
                  const ObjectiveConfig& cfg, ObjectiveReport& report,
                  GradientTape* tape = nullptr);

}  // namespace ppob

#endif  // PPOB_OBJECTIVES_HPP_
