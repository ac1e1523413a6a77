#include "ppob/dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ppob {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;  // ln(2*pi)

const Categorical& as_cat(const ActionDistribution& d) { return std::get<Categorical>(d); }
const DiagGaussian& as_gauss(const ActionDistribution& d) { return std::get<DiagGaussian>(d); }
}  // namespace

Categorical make_categorical(std::vector<double> logits) {
  Categorical c;
  c.logits = std::move(logits);
  const std::size_t n = c.logits.size();
  c.probs.resize(n);
  c.log_probs.resize(n);
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double z : c.logits) {
    check_finite(z, "categorical logit");
    max_logit = std::max(max_logit, z);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(c.logits[i] - max_logit);
  const double log_z = max_logit + std::log(sum);
  for (std::size_t i = 0; i < n; ++i) {
    c.log_probs[i] = c.logits[i] - log_z;
    c.probs[i] = std::exp(c.log_probs[i]);
  }
  return c;
}

DiagGaussian make_diag_gaussian(std::vector<double> mean, std::vector<double> log_std) {
  if (mean.size() != log_std.size()) throw UsageError("gaussian mean/log_std size mismatch");
  DiagGaussian g;
  g.mean = std::move(mean);
  g.log_std = std::move(log_std);
  g.std_dev.resize(g.mean.size());
  for (std::size_t i = 0; i < g.mean.size(); ++i) {
    check_finite(g.mean[i], "gaussian mean");
    check_finite(g.log_std[i], "gaussian log_std");
    g.std_dev[i] = std::exp(g.log_std[i]);
  }
  return g;
}

double log_prob(const ActionDistribution& dist, const Action& action) {
  if (std::holds_alternative<Categorical>(dist)) {
    const auto& c = as_cat(dist);
    if (action.index < 0 || action.index >= static_cast<int>(c.probs.size()))
      throw UsageError("categorical action index out of range");
    return c.log_probs[action.index];
  }
  const auto& g = as_gauss(dist);
  if (action.vec.size() != g.mean.size()) throw UsageError("gaussian action dimension mismatch");
  double lp = 0.0;
  for (std::size_t i = 0; i < g.mean.size(); ++i) {
    const double z = (action.vec[i] - g.mean[i]) / g.std_dev[i];
    lp += -0.5 * z * z - g.log_std[i] - 0.5 * kLogTwoPi;
  }
  return lp;
}

double prob_at(const ActionDistribution& dist, const Action& action) {
  if (std::holds_alternative<Categorical>(dist)) {
    const auto& c = as_cat(dist);
    if (action.index < 0 || action.index >= static_cast<int>(c.probs.size()))
      throw UsageError("categorical action index out of range");
    return c.probs[action.index];
  }
  return std::exp(log_prob(dist, action));
}

double entropy(const ActionDistribution& dist) {
  if (std::holds_alternative<Categorical>(dist)) {
    const auto& c = as_cat(dist);
    double h = 0.0;
    for (std::size_t i = 0; i < c.probs.size(); ++i) {
      if (c.probs[i] > 0.0) h -= c.probs[i] * c.log_probs[i];
    }
    return h;
  }
  const auto& g = as_gauss(dist);
  double h = 0.0;
  for (double ls : g.log_std) h += ls + 0.5 * (kLogTwoPi + 1.0);
  return h;
}

double kl_divergence(const ActionDistribution& from, const ActionDistribution& to) {
  if (from.index() != to.index()) throw UsageError("kl_divergence: distribution family mismatch");
  if (std::holds_alternative<Categorical>(from)) {
    const auto& p = as_cat(from);
    const auto& q = as_cat(to);
    if (p.probs.size() != q.probs.size()) throw UsageError("kl_divergence: dimension mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.probs.size(); ++i) {
      if (p.probs[i] > 0.0) {
        if (q.probs[i] <= 0.0) throw NumericFault("kl_divergence: infinite (support mismatch)");
        kl += p.probs[i] * (p.log_probs[i] - q.log_probs[i]);
      }
    }
    return kl;
  }
  const auto& p = as_gauss(from);
  const auto& q = as_gauss(to);
  if (p.mean.size() != q.mean.size()) throw UsageError("kl_divergence: dimension mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.mean.size(); ++i) {
    const double dm = p.mean[i] - q.mean[i];
    const double vp = p.std_dev[i] * p.std_dev[i];
    const double vq = q.std_dev[i] * q.std_dev[i];
    kl += q.log_std[i] - p.log_std[i] + (vp + dm * dm) / (2.0 * vq) - 0.5;
  }
  return kl;
}

Action sample(const ActionDistribution& dist, Rng& rng) {
  Action a;
  if (std::holds_alternative<Categorical>(dist)) {
    const auto& c = as_cat(dist);
    const double u = rng.uniform01();
    double acc = 0.0;
    a.index = static_cast<int>(c.probs.size()) - 1;
    for (std::size_t i = 0; i < c.probs.size(); ++i) {
      acc += c.probs[i];
      if (u < acc) {
        a.index = static_cast<int>(i);
        break;
      }
    }
    return a;
  }
  const auto& g = as_gauss(dist);
  a.vec.resize(g.mean.size());
  for (std::size_t i = 0; i < g.mean.size(); ++i) a.vec[i] = g.mean[i] + g.std_dev[i] * rng.normal();
  return a;
}

Action mode(const ActionDistribution& dist) {
  Action a;
  if (std::holds_alternative<Categorical>(dist)) {
    const auto& c = as_cat(dist);
    a.index = static_cast<int>(std::max_element(c.probs.begin(), c.probs.end()) - c.probs.begin());
    return a;
  }
  a.vec = as_gauss(dist).mean;
  return a;
}

int action_dim(const ActionDistribution& dist) {
  if (std::holds_alternative<Categorical>(dist)) return static_cast<int>(as_cat(dist).probs.size());
  return static_cast<int>(as_gauss(dist).mean.size());
}

std::vector<double> dlogprob_dhead(const ActionDistribution& dist, const Action& action) {
  if (std::holds_alternative<Categorical>(dist)) {
    const auto& c = as_cat(dist);
    std::vector<double> g(c.probs.size());
    for (std::size_t j = 0; j < c.probs.size(); ++j) g[j] = -c.probs[j];
    g[action.index] += 1.0;
    return g;
  }
  const auto& gd = as_gauss(dist);
  std::vector<double> g(gd.mean.size());
  for (std::size_t i = 0; i < gd.mean.size(); ++i) {
    const double var = gd.std_dev[i] * gd.std_dev[i];
    g[i] = (action.vec[i] - gd.mean[i]) / var;
  }
  return g;
}

std::vector<double> dlogprob_dlogstd(const ActionDistribution& dist, const Action& action) {
  if (std::holds_alternative<Categorical>(dist)) return {};
  const auto& gd = as_gauss(dist);
  std::vector<double> g(gd.mean.size());
  for (std::size_t i = 0; i < gd.mean.size(); ++i) {
    const double z = (action.vec[i] - gd.mean[i]) / gd.std_dev[i];
    g[i] = z * z - 1.0;
  }
  return g;
}

std::vector<double> dentropy_dhead(const ActionDistribution& dist) {
  if (std::holds_alternative<Categorical>(dist)) {
    const auto& c = as_cat(dist);
    const double h = entropy(dist);
    std::vector<double> g(c.probs.size());
    for (std::size_t j = 0; j < c.probs.size(); ++j) g[j] = -c.probs[j] * (c.log_probs[j] + h);
    return g;
  }
  return std::vector<double>(as_gauss(dist).mean.size(), 0.0);
}

std::vector<double> dentropy_dlogstd(const ActionDistribution& dist) {
  if (std::holds_alternative<Categorical>(dist)) return {};
  return std::vector<double>(as_gauss(dist).mean.size(), 1.0);
}

DistGrad dkl_old_new_dnew(const ActionDistribution& old_dist, const ActionDistribution& new_dist) {
  DistGrad out;
  if (std::holds_alternative<Categorical>(old_dist)) {
    const auto& p_old = as_cat(old_dist);
    const auto& p_new = as_cat(new_dist);
    out.dhead.resize(p_new.probs.size());
    for (std::size_t j = 0; j < p_new.probs.size(); ++j) out.dhead[j] = p_new.probs[j] - p_old.probs[j];
    return out;
  }
  const auto& p = as_gauss(old_dist);
  const auto& q = as_gauss(new_dist);
  out.dhead.resize(q.mean.size());
  out.dlogstd.resize(q.mean.size());
  for (std::size_t i = 0; i < q.mean.size(); ++i) {
    const double vq = q.std_dev[i] * q.std_dev[i];
    const double vp = p.std_dev[i] * p.std_dev[i];
    const double dm = p.mean[i] - q.mean[i];
    out.dhead[i] = (q.mean[i] - p.mean[i]) / vq;
    out.dlogstd[i] = 1.0 - (vp + dm * dm) / vq;
  }
  return out;
}

DistGrad dkl_new_old_dnew(const ActionDistribution& new_dist, const ActionDistribution& old_dist) {
  DistGrad out;
  if (std::holds_alternative<Categorical>(new_dist)) {
    const auto& p = as_cat(new_dist);   // differentiated
    const auto& q = as_cat(old_dist);   // fixed
    const double kl = kl_divergence(new_dist, old_dist);
    out.dhead.resize(p.probs.size());
    for (std::size_t j = 0; j < p.probs.size(); ++j) {
      out.dhead[j] = p.probs[j] * ((p.log_probs[j] - q.log_probs[j]) - kl);
    }
    return out;
  }
  const auto& p = as_gauss(new_dist);
  const auto& q = as_gauss(old_dist);
  out.dhead.resize(p.mean.size());
  out.dlogstd.resize(p.mean.size());
  for (std::size_t i = 0; i < p.mean.size(); ++i) {
    const double vq = q.std_dev[i] * q.std_dev[i];
    const double vp = p.std_dev[i] * p.std_dev[i];
    out.dhead[i] = (p.mean[i] - q.mean[i]) / vq;
    out.dlogstd[i] = vp / vq - 1.0;
  }
  return out;
}

}  // namespace ppob
