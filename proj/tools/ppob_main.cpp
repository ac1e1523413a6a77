#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ppob/barrier.hpp"
#include "ppob/config.hpp"
#include "ppob/trainer.hpp"

namespace {

using namespace ppob;

struct ConfigCli {
  std::string preset;
  std::string config_path;
  std::vector<std::string> sets;  // key=value overrides
  std::string env;
  std::string objective;
  std::string seed;
  std::string iterations;
  std::string delta;
  std::string mu;
  std::string epsilon;
  std::string step_size;
};

void add_config_options(CLI::App* cmd, ConfigCli& opts) {
  cmd->add_option("--preset", opts.preset, "Named preset: atari-style | mujoco-style | corridor-fast");
  cmd->add_option("--config", opts.config_path, "Plain-text key = value config file");
  cmd->add_option("--set", opts.sets, "Extra override, key=value (repeatable)");
  cmd->add_option("--env", opts.env, "Environment id: corridor | cartpole | pendulum");
  cmd->add_option("--objective", opts.objective, "Surrogate: clip | klpen | klbar | adbar");
  cmd->add_option("--seed", opts.seed, "Run seed");
  cmd->add_option("--iterations", opts.iterations, "Outer iterations L");
  cmd->add_option("--delta", opts.delta, "Barrier radius delta");
  cmd->add_option("--mu", opts.mu, "Barrier coefficient mu");
  cmd->add_option("--epsilon", opts.epsilon, "Clip radius epsilon");
  cmd->add_option("--step-size", opts.step_size, "Optimizer step size");
}

// Resolution order: preset < config file < PPOB_* env vars < flags.
TrainerConfig resolve_config(const ConfigCli& opts) {
  TrainerConfig cfg;
  if (!opts.preset.empty()) cfg = preset_config(opts.preset);
  if (!opts.config_path.empty()) {
    TrainerConfig from_file = parse_config_file(opts.config_path);
    if (!opts.preset.empty())
      throw ConfigError("config: give either --preset or --config, not both");
    cfg = from_file;
  }
  apply_env_overrides(cfg);
  for (const auto& kv : opts.sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!opts.env.empty()) apply_override(cfg, "env", opts.env);
  if (!opts.objective.empty()) apply_override(cfg, "objective", opts.objective);
  if (!opts.seed.empty()) apply_override(cfg, "seed", opts.seed);
  if (!opts.iterations.empty()) apply_override(cfg, "iterations", opts.iterations);
  if (!opts.delta.empty()) apply_override(cfg, "delta", opts.delta);
  if (!opts.mu.empty()) apply_override(cfg, "mu", opts.mu);
  if (!opts.epsilon.empty()) apply_override(cfg, "epsilon", opts.epsilon);
  if (!opts.step_size.empty()) apply_override(cfg, "step_size", opts.step_size);
  validate(cfg);
  return cfg;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::string item = csv.substr(start, comma == std::string::npos ? csv.size() - start
                                                                          : comma - start);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> parse_poly(const std::string& csv) {
  std::vector<double> coeffs;
  for (const auto& tok : split_list(csv)) coeffs.push_back(std::stod(tok));
  if (coeffs.empty()) throw ConfigError("empty coefficient list");
  return coeffs;
}

std::function<double(double)> poly_fn(std::vector<double> coeffs) {
  return [coeffs = std::move(coeffs)](double x) {
    double acc = 0.0;
    double xp = 1.0;
    for (double c : coeffs) {
      acc += c * xp;
      xp *= x;
    }
    return acc;
  };
}

int cmd_train(const ConfigCli& opts, const std::string& runs_root, bool force,
              bool dump_batches) {
  TrainerConfig cfg = resolve_config(opts);
  cfg.dump_batches = cfg.dump_batches || dump_batches;
  const std::string run_dir = make_run_dir(runs_root, cfg, force);
  cfg.out_dir = run_dir;
  write_run_manifest(run_dir, cfg, "running");
  try {
    const TrainResult result = train(cfg);
    finalize_run_manifest(run_dir, "completed");
    const auto& rows = result.metrics.rows;
    std::printf("run dir: %s\n", run_dir.c_str());
    if (!rows.empty()) {
      std::printf("iterations: %d, env steps: %lld\n", rows.back().iteration, rows.back().steps);
      std::printf("final eval return: %s\n", fmt_double(rows.back().eval_return).c_str());
      std::printf("feasibility violations: %lld of %lld samples\n",
                  result.metrics.total_violations, result.metrics.total_samples);
    }
    return 0;
  } catch (const NumericFault& fault) {
    finalize_run_manifest(run_dir, "fault");
    std::fprintf(stderr, "numeric fault: %s\n", fault.what());
    std::fprintf(stderr, "checkpoint and batch dumped under %s\n", run_dir.c_str());
    return 2;
  }
}

int cmd_eval(const std::string& checkpoint, const std::string& env_id, int episodes,
             std::uint64_t seed, const std::string& trace_path) {
  const PolicyParams params = load_checkpoint(checkpoint);
  auto env = make_env(env_id);
  std::vector<Transition> trace;
  const auto [mean, returns] =
      evaluate(params, *env, episodes, seed, trace_path.empty() ? nullptr : &trace);
  std::printf("episodes: %d\n", episodes);
  for (std::size_t i = 0; i < returns.size(); ++i)
    std::printf("episode %zu return: %s\n", i, fmt_double(returns[i]).c_str());
  std::printf("mean return: %s\n", fmt_double(mean).c_str());
  if (!trace_path.empty()) {
    write_trace_csv(trace, trace_path);
    std::printf("trace written: %s\n", trace_path.c_str());
  }
  return 0;
}

int cmd_demo_barrier(std::vector<double> mus, int grid, const std::string& out,
                     const std::string& poly, const std::vector<std::string>& constraints,
                     double lo, double hi) {
  if (mus.empty()) mus = {1.0, 0.1, 0.01};
  std::function<double(double)> objective;
  std::vector<std::function<double(double)>> cs;
  if (poly.empty() && constraints.empty()) {
    const BarrierProblem fixture = default_barrier_problem(1.0);
    objective = fixture.objective;
    cs = fixture.constraints;
  } else {
    if (poly.empty() || constraints.empty())
      throw ConfigError("custom problems need both --poly and --constraint");
    objective = poly_fn(parse_poly(poly));
    for (const auto& c : constraints) cs.push_back(poly_fn(parse_poly(c)));
  }
  const auto curves = emit_curves(objective, cs, mus, grid, lo, hi);
  for (const auto& curve : curves) {
    std::printf("mu = %g: x(mu) = %s, P(x(mu)) = %s, search iterations = %d\n", curve.mu,
                fmt_double(curve.minimizer).c_str(), fmt_double(curve.min_value).c_str(),
                curve.search_iterations);
  }
  write_curves_csv(curves, out);
  std::printf("curves written: %s\n", out.c_str());
  return 0;
}

int cmd_compare(const ConfigCli& opts, const std::string& envs_csv,
                const std::string& algos_csv, const std::string& seeds_csv,
                const std::string& runs_root, bool force) {
  const TrainerConfig base = resolve_config(opts);
  const auto envs = split_list(envs_csv);
  const auto algos = split_list(algos_csv);
  const auto seeds = split_list(seeds_csv);
  if (algos.size() < 2) throw UsageError("compare: need at least two algorithms");
  if (seeds.empty()) throw UsageError("compare: need at least one seed");
  if (envs.empty()) throw UsageError("compare: need at least one environment");

  std::vector<RunRecord> records;
  std::vector<std::string> faulted_envs;
  for (const auto& env_id : envs) {
    bool env_ok = true;
    std::vector<RunRecord> env_records;
    for (const auto& algo : algos) {
      for (const auto& seed : seeds) {
        TrainerConfig cfg = base;
        apply_override(cfg, "env", env_id);
        apply_override(cfg, "objective", algo);
        apply_override(cfg, "seed", seed);
        validate(cfg);
        const std::string run_dir = make_run_dir(runs_root, cfg, force);
        cfg.out_dir = run_dir;
        write_run_manifest(run_dir, cfg, "running");
        try {
          const TrainResult result = train(cfg);
          finalize_run_manifest(run_dir, "completed");
          RunRecord record;
          record.algorithm = algo;
          record.env = env_id;
          record.seed = cfg.seed;
          for (const auto& row : result.metrics.rows)
            record.eval_returns.push_back(row.eval_return);
          env_records.push_back(std::move(record));
          std::printf("completed: %s\n", run_dir.c_str());
        } catch (const NumericFault& fault) {
          finalize_run_manifest(run_dir, "fault");
          std::fprintf(stderr, "warning: numeric fault in %s (%s); dropping %s from comparison\n",
                       run_dir.c_str(), fault.what(), env_id.c_str());
          env_ok = false;
        }
      }
    }
    if (env_ok) {
      for (auto& r : env_records) records.push_back(std::move(r));
    } else {
      faulted_envs.push_back(env_id);
    }
  }

  if (records.empty()) {
    std::fprintf(stderr, "no completed environments; scorecard skipped\n");
    return 2;
  }
  const Scorecard card = scorecard(records);
  const std::string text = card.to_text();
  std::printf("%s", text.c_str());
  const std::string path = (std::filesystem::path(runs_root) / "scorecard.csv").string();
  std::ofstream out(path);
  out << text;
  std::printf("scorecard written: %s\n", path.c_str());
  return faulted_envs.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy optimization with interior-penalty (log-barrier) surrogates"};
  app.require_subcommand(1);

  ConfigCli train_opts;
  std::string train_runs = "runs";
  bool train_force = false;
  bool train_dump = false;
  auto* train_cmd = app.add_subcommand("train", "Train a policy and write run artifacts");
  add_config_options(train_cmd, train_opts);
  train_cmd->add_option("--runs", train_runs, "Root directory for run folders");
  train_cmd->add_flag("--force", train_force, "Overwrite an existing run directory");
  train_cmd->add_flag("--dump-batches", train_dump, "Dump each iteration's rollout batch CSV");

  std::string eval_checkpoint, eval_env = "corridor", eval_trace;
  int eval_episodes = 10;
  std::uint64_t eval_seed = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint with deterministic actions");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--env", eval_env, "Environment id");
  eval_cmd->add_option("--episodes", eval_episodes, "Number of evaluation episodes");
  eval_cmd->add_option("--seed", eval_seed, "Evaluation seed");
  eval_cmd->add_option("--trace", eval_trace, "Write the first episode's trace CSV here");

  std::vector<double> demo_mus;
  int demo_grid = 401;
  std::string demo_out = "barrier_curves.csv";
  std::string demo_poly;
  std::vector<std::string> demo_constraints;
  double demo_lo = 1.0, demo_hi = 2.0;
  auto* demo_cmd = app.add_subcommand("demo-barrier", "Emit 1-D log-barrier curves and minimizers");
  demo_cmd->add_option("--mu", demo_mus, "Barrier coefficient (repeatable; default 1,0.1,0.01)");
  demo_cmd->add_option("--grid", demo_grid, "Grid size");
  demo_cmd->add_option("--out", demo_out, "Output CSV path");
  demo_cmd->add_option("--poly", demo_poly,
                       "Objective polynomial coefficients c0,c1,... (default: f(x) = x)");
  demo_cmd->add_option("--constraint", demo_constraints,
                       "Constraint polynomial c0,c1,... with c(x) >= 0 (repeatable)");
  demo_cmd->add_option("--lo", demo_lo, "Bracket lower end");
  demo_cmd->add_option("--hi", demo_hi, "Bracket upper end");

  ConfigCli compare_opts;
  std::string compare_envs = "corridor,cartpole,pendulum";
  std::string compare_algos = "clip,adbar";
  std::string compare_seeds = "0,1,2";
  std::string compare_runs = "runs";
  bool compare_force = false;
  auto* compare_cmd = app.add_subcommand("compare", "Train algorithm x seed grids and score wins");
  add_config_options(compare_cmd, compare_opts);
  compare_cmd->add_option("--envs", compare_envs, "Comma-separated environment ids");
  compare_cmd->add_option("--algorithms", compare_algos, "Comma-separated objective kinds");
  compare_cmd->add_option("--seeds", compare_seeds, "Comma-separated seeds");
  compare_cmd->add_option("--runs", compare_runs, "Root directory for run folders");
  compare_cmd->add_flag("--force", compare_force, "Overwrite existing run directories");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(train_opts, train_runs, train_force, train_dump);
    if (eval_cmd->parsed())
      return cmd_eval(eval_checkpoint, eval_env, eval_episodes, eval_seed, eval_trace);
    if (demo_cmd->parsed())
      return cmd_demo_barrier(demo_mus, demo_grid, demo_out, demo_poly, demo_constraints,
                              demo_lo, demo_hi);
    if (compare_cmd->parsed())
      return cmd_compare(compare_opts, compare_envs, compare_algos, compare_seeds, compare_runs,
                         compare_force);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "domain error: %s\n", e.what());
    return 1;
  } catch (const NumericFault& e) {
    std::fprintf(stderr, "numeric fault: %s\n", e.what());
    return 2;
  }
  return 0;
}
