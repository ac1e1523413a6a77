#include "ppob/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <set>
#include <sstream>

namespace ppob {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
  return splitmix64(splitmix64(a ^ splitmix64(b)) ^ splitmix64(c ^ 0x9d5f3a7bULL));
}

double nan_mean(const std::vector<double>& xs) {
  double sum = 0.0;
  int n = 0;
  for (double x : xs) {
    if (std::isfinite(x)) {
      sum += x;
      ++n;
    }
  }
  return n > 0 ? sum / n : kNan;
}

}  // namespace

void validate(const TrainerConfig& cfg) {
  if (cfg.iterations < 1) throw ConfigError("trainer: iterations must be >= 1");
  if (cfg.actors < 1) throw ConfigError("trainer: actors must be >= 1");
  if (cfg.horizon < 1) throw ConfigError("trainer: horizon must be >= 1");
  if (cfg.epochs < 1) throw ConfigError("trainer: epochs must be >= 1");
  const int batch = cfg.actors * cfg.horizon;
  if (cfg.minibatch < 1 || cfg.minibatch > batch)
    throw ConfigError("trainer: minibatch must satisfy 1 <= M <= N*T");
  if (batch % cfg.minibatch != 0) throw ConfigError("trainer: minibatch must divide N*T");
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0) throw ConfigError("trainer: gamma must lie in [0, 1]");
  if (cfg.lam < 0.0 || cfg.lam > 1.0) throw ConfigError("trainer: lambda must lie in [0, 1]");
  if (cfg.step_size < 0.0) throw ConfigError("trainer: step_size must be >= 0");
  if (cfg.eval_every < 1) throw ConfigError("trainer: eval_every must be >= 1");
  if (cfg.eval_episodes < 1) throw ConfigError("trainer: eval_episodes must be >= 1");
  if (cfg.hidden_width < 1) throw ConfigError("trainer: hidden_width must be >= 1");
  make_env(cfg.env_id);  // rejects unknown ids
  validate(cfg.objective);
}

TrainResult train(const TrainerConfig& cfg) {
  validate(cfg);
  const int batch_size = cfg.actors * cfg.horizon;

  std::vector<std::unique_ptr<Env>> envs;
  envs.reserve(cfg.actors);
  for (int i = 0; i < cfg.actors; ++i) envs.push_back(make_env(cfg.env_id));
  const EnvSpec& spec = envs.front()->spec();
  const HeadKind head =
      spec.action_space.discrete ? HeadKind::categorical : HeadKind::diag_gaussian;
  const int act_dim = spec.action_space.discrete ? spec.action_space.n : spec.action_space.dim;

  TrainResult result;
  result.params = make_policy_params(head, spec.observation_dim, act_dim,
                                     mix(cfg.seed, 0x1217), cfg.hidden_width);
  OptimizerState opt =
      make_optimizer(OptimizerState::Algo::adam, cfg.step_size, result.params);

  double beta = cfg.objective.beta;
  std::vector<double> episode_return_acc(cfg.actors, 0.0);
  std::deque<double> recent_returns;  // last 100 finished training episodes
  double last_eval = kNan;

  // Per-minibatch objective report rows, written alongside metrics.csv.
  std::string report_rows;
  const auto append_report = [&report_rows](int it, int epoch, int mb,
                                            const ObjectiveReport& r) {
    char buf[360];
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%s,%s,%s,%s,%s,%s,%s,%d,%d\n", it + 1, epoch + 1,
                  mb + 1, fmt_double(r.surrogate).c_str(), fmt_double(r.value_loss).c_str(),
                  fmt_double(r.entropy).c_str(), fmt_double(r.total_loss).c_str(),
                  fmt_double(r.mean_ratio).c_str(), fmt_double(r.mean_kl).c_str(),
                  fmt_double(r.mean_ad).c_str(), r.violations, r.ratio_clamps);
    report_rows += buf;
  };
  const auto write_reports = [&report_rows, &cfg]() {
    if (cfg.out_dir.empty()) return;
    std::FILE* f = std::fopen((cfg.out_dir + "/objective_reports.csv").c_str(), "w");
    if (!f) throw UsageError("train: cannot write objective_reports.csv");
    std::fprintf(f, "iteration,epoch,minibatch,surrogate,value_loss,entropy,total_loss,"
                    "mean_ratio,mean_kl,mean_ad,violations,ratio_clamps\n");
    std::fwrite(report_rows.data(), 1, report_rows.size(), f);
    std::fclose(f);
  };

  auto eval_env = make_env(cfg.env_id);

  for (int it = 0; it < cfg.iterations; ++it) {
    const double alpha =
        cfg.anneal ? 1.0 - static_cast<double>(it) / cfg.iterations : 1.0;
    ObjectiveConfig obj = cfg.objective;
    obj.beta = beta;
    if (cfg.anneal_epsilon && obj.kind == ObjectiveKind::clip) obj.epsilon *= alpha;
    if (cfg.anneal_entropy) obj.entropy_coeff *= alpha;

    RolloutBatch batch;
    double kl_acc = 0.0;
    double ad_acc = 0.0;
    long long violation_acc = 0;
    long long sample_acc = 0;

    try {
      batch = collect(result.params, envs, cfg.horizon, mix(cfg.seed, 0xC0, it),
                      &episode_return_acc);
      compute_gae(batch, GaeConfig{cfg.gamma, cfg.lam});
      if (cfg.dump_batches && !cfg.out_dir.empty())
        dump_batch_csv(batch, cfg.out_dir + "/batch_" + std::to_string(it + 1) + ".csv");

      for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto sets = minibatches(batch_size, cfg.minibatch, mix(cfg.seed, it, epoch));
        for (std::size_t mb = 0; mb < sets.size(); ++mb) {
          try {
            const BatchSlice slice = make_slice(batch, sets[mb]);
            GradientTape tape = zero_tape(result.params);
            ObjectiveReport report;
            total_loss(slice, result.params, obj, report, &tape);
            optimizer_step(result.params, tape, opt, alpha);
            append_report(it, epoch, static_cast<int>(mb), report);
            kl_acc += report.mean_kl * report.sample_count;
            ad_acc += report.mean_ad * report.sample_count;
            violation_acc += report.violations;
            sample_acc += report.sample_count;
          } catch (const NumericFault& fault) {
            throw NumericFault("iteration " + std::to_string(it + 1) + " epoch " +
                               std::to_string(epoch + 1) + " minibatch " +
                               std::to_string(mb + 1) + ": " + fault.what());
          }
        }
      }
    } catch (const NumericFault& fault) {
      if (!cfg.out_dir.empty()) {
        save_checkpoint(result.params, cfg.out_dir + "/fault_checkpoint.txt");
        if (batch.size() > 0) dump_batch_csv(batch, cfg.out_dir + "/fault_batch.csv");
        write_metrics_csv(result.metrics, cfg.out_dir + "/metrics.csv");
        write_reports();
      }
      throw;
    }

    for (double r : batch.completed_episode_returns) {
      recent_returns.push_back(r);
      if (recent_returns.size() > 100) recent_returns.pop_front();
    }

    // Adaptive KL penalty: doubled/halved around the target after each
    // iteration, measured on the full batch under the updated parameters.
    if (obj.kind == ObjectiveKind::klpen) {
      double kl_now = 0.0;
      for (int slot = 0; slot < batch.size(); ++slot) {
        const double* s = batch.state_at(slot);
        auto [dist_new, value] = forward(result.params, {s, s + batch.obs_dim});
        (void)value;
        kl_now += kl_divergence(batch.old_dist_at(slot), dist_new);
      }
      kl_now /= batch.size();
      if (kl_now > 1.5 * obj.d_targ) {
        beta *= 2.0;
      } else if (kl_now < obj.d_targ / 1.5) {
        beta /= 2.0;
      }
    }

    if ((it + 1) % cfg.eval_every == 0 || it + 1 == cfg.iterations) {
      last_eval =
          evaluate(result.params, *eval_env, cfg.eval_episodes, mix(cfg.seed, 0xE7A1, it)).first;
    }

    MetricsRow row;
    row.iteration = it + 1;
    row.steps = static_cast<long long>(it + 1) * batch_size;
    double train_return = kNan;
    if (!recent_returns.empty()) {
      double sum = 0.0;
      for (double r : recent_returns) sum += r;
      train_return = sum / static_cast<double>(recent_returns.size());
    }
    row.train_return = train_return;
    row.eval_return = last_eval;
    row.mean_kl = sample_acc > 0 ? kl_acc / sample_acc : kNan;
    row.mean_ad = sample_acc > 0 ? ad_acc / sample_acc : kNan;
    row.violations = violation_acc;
    row.beta = beta;
    row.alpha = alpha;
    result.metrics.rows.push_back(row);
    result.metrics.total_samples += sample_acc;
    result.metrics.total_violations += violation_acc;
  }

  if (!cfg.out_dir.empty()) {
    write_metrics_csv(result.metrics, cfg.out_dir + "/metrics.csv");
    save_checkpoint(result.params, cfg.out_dir + "/checkpoint.txt");
    write_reports();
  }
  return result;
}

std::pair<double, std::vector<double>> evaluate(const PolicyParams& params, Env& env,
                                                int episodes, std::uint64_t seed,
                                                std::vector<Transition>* first_episode_trace) {
  if (episodes < 1) throw UsageError("evaluate: episodes must be >= 1");
  std::vector<double> returns;
  returns.reserve(episodes);
  for (int ep = 0; ep < episodes; ++ep) {
    std::vector<double> state = env.reset(mix(seed, 0x5EED, ep));
    double total = 0.0;
    while (true) {
      auto [dist, value] = forward(params, state);
      (void)value;
      const Transition tr = env.step(mode(dist));
      total += tr.reward;
      if (ep == 0 && first_episode_trace) first_episode_trace->push_back(tr);
      if (tr.done) break;
      state = tr.next_state;
    }
    returns.push_back(total);
  }
  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= static_cast<double>(returns.size());
  return {mean, returns};
}

namespace {

// Seed-averaged eval stream per (algorithm, env).
std::vector<double> average_streams(const std::vector<const RunRecord*>& records) {
  const std::size_t len = records.front()->eval_returns.size();
  std::vector<double> avg(len, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    double sum = 0.0;
    for (const RunRecord* r : records) sum += r->eval_returns[i];
    avg[i] = sum / static_cast<double>(records.size());
  }
  return avg;
}

}  // namespace

Scorecard scorecard(const std::vector<RunRecord>& runs) {
  Scorecard card;
  std::set<std::string> algo_set, env_set;
  for (const auto& run : runs) {
    if (!algo_set.count(run.algorithm)) {
      algo_set.insert(run.algorithm);
      card.algorithms.push_back(run.algorithm);
    }
    if (!env_set.count(run.env)) {
      env_set.insert(run.env);
      card.envs.push_back(run.env);
    }
  }
  if (card.algorithms.size() < 2) throw UsageError("scorecard: need at least two algorithms");

  for (const auto& env : card.envs) {
    std::size_t expect_len = 0;
    std::set<std::uint64_t> expect_seeds;
    for (const auto& algo : card.algorithms) {
      std::vector<const RunRecord*> records;
      std::set<std::uint64_t> seeds;
      for (const auto& run : runs) {
        if (run.env == env && run.algorithm == algo) {
          records.push_back(&run);
          seeds.insert(run.seed);
        }
      }
      if (records.empty())
        throw UsageError("scorecard: missing runs for " + algo + " on " + env);
      for (const RunRecord* r : records) {
        if (expect_len == 0) expect_len = r->eval_returns.size();
        if (r->eval_returns.size() != expect_len)
          throw UsageError("scorecard: mismatched run lengths on " + env);
      }
      if (expect_seeds.empty()) {
        expect_seeds = seeds;
      } else if (seeds != expect_seeds) {
        throw UsageError("scorecard: algorithms ran different seeds on " + env);
      }
      const std::vector<double> avg = average_streams(records);
      const std::size_t window = std::min<std::size_t>(10, avg.size());
      std::vector<double> tail(avg.end() - window, avg.end());
      card.reward_100[env][algo] = nan_mean(tail);
      card.reward_all[env][algo] = nan_mean(avg);
    }
  }

  for (const auto& algo : card.algorithms) {
    card.wins_100[algo] = 0;
    card.wins_all[algo] = 0;
  }
  const auto award = [](const std::map<std::string, double>& table,
                        std::map<std::string, int>& wins) {
    std::string best;
    double best_value = -std::numeric_limits<double>::infinity();
    bool tie = false;
    for (const auto& [algo, value] : table) {
      if (!std::isfinite(value)) continue;
      if (value > best_value) {
        best_value = value;
        best = algo;
        tie = false;
      } else if (value == best_value) {
        tie = true;
      }
    }
    if (!best.empty() && !tie) wins[best] += 1;
  };
  for (const auto& env : card.envs) {
    award(card.reward_100.at(env), card.wins_100);
    award(card.reward_all.at(env), card.wins_all);
  }
  return card;
}

std::string Scorecard::to_text() const {
  std::ostringstream out;
  out << "environment";
  for (const auto& algo : algorithms) out << "," << algo << "_reward_100";
  for (const auto& algo : algorithms) out << "," << algo << "_reward_all";
  out << "\n";
  for (const auto& env : envs) {
    out << env;
    for (const auto& algo : algorithms) out << "," << fmt_double(reward_100.at(env).at(algo));
    for (const auto& algo : algorithms) out << "," << fmt_double(reward_all.at(env).at(algo));
    out << "\n";
  }
  out << "wins_reward_100";
  for (const auto& algo : algorithms) out << "," << algo << "=" << wins_100.at(algo);
  out << "\n";
  out << "wins_reward_all";
  for (const auto& algo : algorithms) out << "," << algo << "=" << wins_all.at(algo);
  out << "\n";
  return out.str();
}

const char kMetricsHeader[] =
    "iteration,steps,train_return,eval_return,mean_kl,mean_ad,violations,beta,alpha";

void write_metrics_csv(const RunMetrics& metrics, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw UsageError("write_metrics_csv: cannot open " + path);
  std::fprintf(f, "%s\n", kMetricsHeader);
  for (const auto& row : metrics.rows) {
    std::fprintf(f, "%d,%lld,%s,%s,%s,%s,%lld,%s,%s\n", row.iteration, row.steps,
                 fmt_double(row.train_return).c_str(), fmt_double(row.eval_return).c_str(),
                 fmt_double(row.mean_kl).c_str(), fmt_double(row.mean_ad).c_str(),
                 row.violations, fmt_double(row.beta).c_str(), fmt_double(row.alpha).c_str());
  }
  std::fclose(f);
}

}  // namespace ppob
