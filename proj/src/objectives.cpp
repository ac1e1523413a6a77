#include "ppob/objectives.hpp"

#include <algorithm>
#include <cmath>

namespace ppob {

ObjectiveKind objective_kind_from_string(const std::string& name) {
  if (name == "clip") return ObjectiveKind::clip;
  if (name == "klpen") return ObjectiveKind::klpen;
  if (name == "klbar") return ObjectiveKind::klbar;
  if (name == "adbar") return ObjectiveKind::adbar;
  throw ConfigError("objective: unknown kind '" + name + "'");
}

std::string to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::clip: return "clip";
    case ObjectiveKind::klpen: return "klpen";
    case ObjectiveKind::klbar: return "klbar";
    case ObjectiveKind::adbar: return "adbar";
  }
  return "?";
}

void validate(const ObjectiveConfig& cfg) {
  if (cfg.epsilon <= 0.0) throw ConfigError("objective: epsilon must be > 0");
  if (cfg.mu <= 0.0) throw ConfigError("objective: mu must be > 0");
  if (cfg.delta <= 0.0) throw ConfigError("objective: delta must be > 0");
  if (cfg.vf_coeff < 0.0) throw ConfigError("objective: vf_coeff must be >= 0");
  if (cfg.entropy_coeff < 0.0) throw ConfigError("objective: entropy_coeff must be >= 0");
  if (cfg.barrier_floor <= 0.0) throw ConfigError("objective: barrier_floor must be > 0");
}

double ratio(double new_log_prob, double old_log_prob, int* clamped) {
  check_finite(new_log_prob, "new_log_prob");
  check_finite(old_log_prob, "old_log_prob");
  double exponent = new_log_prob - old_log_prob;
  if (exponent < -30.0 || exponent > 30.0) {
    if (clamped) ++*clamped;
    exponent = std::clamp(exponent, -30.0, 30.0);
  }
  return std::exp(exponent);
}

double ad_distance(double old_prob_at_action, double new_prob_at_action) {
  if (old_prob_at_action < 0.0 || new_prob_at_action < 0.0)
    throw UsageError("ad_distance: probabilities must be non-negative");
  const double diff = std::sqrt(new_prob_at_action) - std::sqrt(old_prob_at_action);
  return diff * diff;
}

namespace {

struct SampleTerms {
  double surrogate = 0.0;       // this sample's contribution (ascent form)
  double d_lp = 0.0;            // d(surrogate)/d(new log-prob at the action)
  DistGrad dist_grad;           // extra d(surrogate)/d(head), d/d(log_std)
  double monitored = 0.0;       // distance checked against delta
  bool violated = false;
};

// One sample of the chosen surrogate plus its analytic derivative pieces.
SampleTerms surrogate_sample(const ObjectiveConfig& cfg, double adv, double ratio_val,
                             bool ratio_clamped, double lp_new, double old_prob,
                             const ActionDistribution& dist_new,
                             const ActionDistribution& dist_old, double kl_old_new,
                             double ad_dist, bool want_grad) {
  SampleTerms t;
  const double dr_dlp = ratio_clamped ? 0.0 : ratio_val;  // r = exp(lp_new - lp_old)
  switch (cfg.kind) {
    case ObjectiveKind::clip: {
      const double unclipped = ratio_val * adv;
      const double clipped =
          std::clamp(ratio_val, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon) * adv;
      t.surrogate = std::min(unclipped, clipped);
      // Gradient follows the active branch; inside the clip region the two
      // coincide, outside it the clipped branch is constant in r.
      if (want_grad && unclipped <= clipped) t.d_lp = adv * dr_dlp;
      t.monitored = ad_dist;
      break;
    }
    case ObjectiveKind::klpen: {
      t.surrogate = ratio_val * adv - cfg.beta * kl_old_new;
      t.monitored = kl_old_new;
      if (want_grad) {
        t.d_lp = adv * dr_dlp;
        t.dist_grad = dkl_old_new_dnew(dist_old, dist_new);
        for (double& g : t.dist_grad.dhead) g *= -cfg.beta;
        for (double& g : t.dist_grad.dlogstd) g *= -cfg.beta;
      }
      break;
    }
    case ObjectiveKind::klbar: {
      const double kl_new_old = kl_divergence(dist_new, dist_old);
      t.monitored = kl_new_old;
      double gap = cfg.delta - kl_new_old;
      t.violated = gap <= cfg.barrier_floor;
      if (t.violated) gap = cfg.barrier_floor;
      t.surrogate = ratio_val * adv + cfg.mu * std::log(gap);
      if (want_grad) {
        t.d_lp = adv * dr_dlp;
        if (!t.violated) {
          t.dist_grad = dkl_new_old_dnew(dist_new, dist_old);
          const double factor = -cfg.mu / gap;
          for (double& g : t.dist_grad.dhead) g *= factor;
          for (double& g : t.dist_grad.dlogstd) g *= factor;
        }
      }
      break;
    }
    case ObjectiveKind::adbar: {
      t.monitored = ad_dist;
      double gap = cfg.delta - ad_dist;
      t.violated = gap <= cfg.barrier_floor;
      if (t.violated) gap = cfg.barrier_floor;
      t.surrogate = ratio_val * adv + cfg.mu * std::log(gap);
      if (want_grad) {
        t.d_lp = adv * dr_dlp;
        if (!t.violated) {
          // d/d(lp) of (sqrt(p) - sqrt(p_old))^2 with p = exp(lp).
          const double sqrt_new = std::sqrt(std::exp(lp_new));
          const double dd_dlp = (sqrt_new - std::sqrt(old_prob)) * sqrt_new;
          t.d_lp += -cfg.mu / gap * dd_dlp;
        }
      }
      break;
    }
  }
  if (cfg.kind == ObjectiveKind::clip || cfg.kind == ObjectiveKind::klpen)
    t.violated = cfg.delta - t.monitored <= cfg.barrier_floor;
  return t;
}

}  // namespace

double total_loss(const BatchSlice& slice, const PolicyParams& params,
                  const ObjectiveConfig& cfg, ObjectiveReport& report, GradientTape* tape) {
  validate(cfg);
  const RolloutBatch& batch = *slice.batch;
  const int n = slice.size();
  if (n == 0) throw UsageError("total_loss: empty slice");
  const double inv_n = 1.0 / static_cast<double>(n);

  report = ObjectiveReport{};
  report.sample_count = n;

  MlpCache policy_cache, value_cache;
  std::vector<double> state(batch.obs_dim);

  for (int i = 0; i < n; ++i) {
    const int slot = slice.idx[i];
    const double adv = slice.norm_adv[i];
    const double* s = batch.state_at(slot);
    state.assign(s, s + batch.obs_dim);

    std::vector<double> head_out =
        mlp_forward(params.policy, state, tape ? &policy_cache : nullptr);
    const double value =
        mlp_forward(params.value, state, tape ? &value_cache : nullptr)[0];

    ActionDistribution dist_new =
        params.head == HeadKind::categorical
            ? ActionDistribution(make_categorical(std::move(head_out)))
            : ActionDistribution(make_diag_gaussian(std::move(head_out), params.log_std));
    const ActionDistribution dist_old = batch.old_dist_at(slot);

    const Action& action = batch.actions[slot];
    const double lp_new = log_prob(dist_new, action);
    int clamp_count = 0;
    const double r = ratio(lp_new, batch.old_log_prob[slot], &clamp_count);
    const double kl_old_new = kl_divergence(dist_old, dist_new);
    const double ad = ad_distance(batch.old_prob_at_action[slot], std::exp(lp_new));
    const double ent = entropy(dist_new);

    const SampleTerms terms =
        surrogate_sample(cfg, adv, r, clamp_count > 0, lp_new,
                         batch.old_prob_at_action[slot], dist_new, dist_old, kl_old_new, ad,
                         tape != nullptr);

    const double g = batch.returns[slot];
    const double v_err = value - g;

    report.surrogate += terms.surrogate * inv_n;
    report.value_loss += v_err * v_err * inv_n;
    report.entropy += ent * inv_n;
    report.mean_ratio += r * inv_n;
    report.mean_kl += kl_old_new * inv_n;
    report.mean_ad += ad * inv_n;
    report.ratio_clamps += clamp_count;
    if (terms.violated) ++report.violations;

    if (tape) {
      // loss = -surrogate + vf * (V - G)^2 - ent_coeff * H, averaged.
      std::vector<double> d_head = dlogprob_dhead(dist_new, action);
      for (double& gd : d_head) gd *= -inv_n * terms.d_lp;
      if (!terms.dist_grad.dhead.empty()) {
        for (std::size_t j = 0; j < d_head.size(); ++j)
          d_head[j] += -inv_n * terms.dist_grad.dhead[j];
      }
      if (cfg.entropy_coeff != 0.0) {
        const std::vector<double> de = dentropy_dhead(dist_new);
        for (std::size_t j = 0; j < d_head.size(); ++j)
          d_head[j] += -cfg.entropy_coeff * inv_n * de[j];
      }
      mlp_backward(params.policy, policy_cache, d_head, tape->policy);

      const std::vector<double> d_value = {cfg.vf_coeff * 2.0 * v_err * inv_n};
      mlp_backward(params.value, value_cache, d_value, tape->value);

      if (params.head == HeadKind::diag_gaussian) {
        std::vector<double> d_ls = dlogprob_dlogstd(dist_new, action);
        for (std::size_t j = 0; j < d_ls.size(); ++j) {
          double acc = -inv_n * terms.d_lp * d_ls[j];
          if (!terms.dist_grad.dlogstd.empty()) acc += -inv_n * terms.dist_grad.dlogstd[j];
          acc += -cfg.entropy_coeff * inv_n;  // dH/d(log_std) = 1 per dim
          tape->log_std[j] += acc;
        }
      }
    }
  }

  report.total_loss =
      -report.surrogate + cfg.vf_coeff * report.value_loss - cfg.entropy_coeff * report.entropy;
  check_finite(report.total_loss, "total loss");
  return report.total_loss;
}

namespace {

double run_surrogate(const BatchSlice& slice, const PolicyParams& params, ObjectiveConfig cfg,
                     ObjectiveReport* report) {
  cfg.vf_coeff = 0.0;
  cfg.entropy_coeff = 0.0;
  ObjectiveReport local;
  total_loss(slice, params, cfg, local);
  if (report) *report = local;
  return local.surrogate;
}

}  // namespace

double surrogate_clip(const BatchSlice& slice, const PolicyParams& params, double epsilon,
                      ObjectiveReport* report) {
  ObjectiveConfig cfg;
  cfg.kind = ObjectiveKind::clip;
  cfg.epsilon = epsilon;
  return run_surrogate(slice, params, cfg, report);
}

double surrogate_klpen(const BatchSlice& slice, const PolicyParams& params, double beta,
                       ObjectiveReport* report) {
  ObjectiveConfig cfg;
  cfg.kind = ObjectiveKind::klpen;
  cfg.beta = beta;
  return run_surrogate(slice, params, cfg, report);
}

double surrogate_klbar(const BatchSlice& slice, const PolicyParams& params, double mu,
                       double delta, double barrier_floor, ObjectiveReport* report) {
  ObjectiveConfig cfg;
  cfg.kind = ObjectiveKind::klbar;
  cfg.mu = mu;
  cfg.delta = delta;
  cfg.barrier_floor = barrier_floor;
  return run_surrogate(slice, params, cfg, report);
}

double surrogate_adbar(const BatchSlice& slice, const PolicyParams& params, double mu,
                       double delta, double barrier_floor, ObjectiveReport* report) {
  ObjectiveConfig cfg;
  cfg.kind = ObjectiveKind::adbar;
  cfg.mu = mu;
  cfg.delta = delta;
  cfg.barrier_floor = barrier_floor;
  return run_surrogate(slice, params, cfg, report);
}

}  // namespace ppob
