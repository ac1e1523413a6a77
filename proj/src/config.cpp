#include "ppob/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ppob {

const char kLibraryVersion[] = "ppob 0.1.0";

namespace {

long long parse_int(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (errno != 0 || end == value.c_str() || *end != '\0')
    throw ConfigError("config: key '" + key + "': not an integer: '" + value + "'");
  return v;
}

double parse_real(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (errno != 0 || end == value.c_str() || *end != '\0')
    throw ConfigError("config: key '" + key + "': not a number: '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: key '" + key + "': expected true/false: '" + value + "'");
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm_utc);
  return buf;
}

}  // namespace

std::vector<std::string> preset_names() { return {"atari-style", "mujoco-style", "corridor-fast"}; }

TrainerConfig preset_config(const std::string& name) {
  TrainerConfig cfg;
  cfg.preset = name;
  if (name == "atari-style") {
    // Standard Atari-scale PPO settings with a desk environment substituted.
    cfg.env_id = "cartpole";
    cfg.iterations = 150;
    cfg.actors = 16;
    cfg.horizon = 128;
    cfg.epochs = 3;
    cfg.minibatch = 256;  // 32 x 8
    cfg.gamma = 0.99;
    cfg.lam = 0.95;
    cfg.step_size = 2.5e-4;
    cfg.anneal = true;
    cfg.anneal_epsilon = true;
    cfg.anneal_entropy = true;
    cfg.objective.kind = ObjectiveKind::adbar;
    cfg.objective.epsilon = 0.1;
    cfg.objective.mu = 1.0;
    cfg.objective.delta = 0.5;
    cfg.objective.vf_coeff = 1.0;
    cfg.objective.entropy_coeff = 0.01;
    cfg.eval_every = 5;
    cfg.eval_episodes = 10;
  } else if (name == "mujoco-style") {
    cfg.env_id = "pendulum";
    cfg.iterations = 100;
    cfg.actors = 1;
    cfg.horizon = 2048;
    cfg.epochs = 10;
    cfg.minibatch = 64;
    cfg.gamma = 0.99;
    cfg.lam = 0.95;
    cfg.step_size = 3e-4;
    cfg.anneal = false;
    cfg.anneal_epsilon = false;
    cfg.anneal_entropy = false;
    cfg.objective.kind = ObjectiveKind::adbar;
    cfg.objective.epsilon = 0.2;
    cfg.objective.mu = 1.0;
    cfg.objective.delta = 0.5;
    cfg.objective.vf_coeff = 1.0;
    cfg.objective.entropy_coeff = 0.0;
    cfg.eval_every = 5;
    cfg.eval_episodes = 10;
  } else if (name == "corridor-fast") {
    cfg.env_id = "corridor";
    cfg.iterations = 200;
    cfg.actors = 4;
    cfg.horizon = 32;
    cfg.epochs = 3;
    cfg.minibatch = 32;
    cfg.gamma = 0.99;
    cfg.lam = 0.95;
    cfg.step_size = 3e-3;
    cfg.anneal = false;
    cfg.anneal_epsilon = false;
    cfg.anneal_entropy = false;
    cfg.objective.kind = ObjectiveKind::adbar;
    cfg.objective.epsilon = 0.2;
    cfg.objective.mu = 1.0;
    cfg.objective.delta = 0.5;
    cfg.objective.vf_coeff = 1.0;
    cfg.objective.entropy_coeff = 0.01;
    cfg.eval_every = 1;
    cfg.eval_episodes = 4;
  } else {
    throw ConfigError("config: unknown preset '" + name + "'");
  }
  return cfg;
}

void apply_override(TrainerConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "preset") {
    cfg = preset_config(value);
  } else if (key == "env") {
    make_env(value);  // rejects unknown ids, names the offender
    cfg.env_id = value;
  } else if (key == "objective") {
    cfg.objective.kind = objective_kind_from_string(value);
  } else if (key == "iterations") {
    cfg.iterations = static_cast<int>(parse_int(key, value));
  } else if (key == "actors") {
    cfg.actors = static_cast<int>(parse_int(key, value));
  } else if (key == "horizon") {
    cfg.horizon = static_cast<int>(parse_int(key, value));
  } else if (key == "epochs") {
    cfg.epochs = static_cast<int>(parse_int(key, value));
  } else if (key == "minibatch") {
    cfg.minibatch = static_cast<int>(parse_int(key, value));
  } else if (key == "gamma") {
    cfg.gamma = parse_real(key, value);
  } else if (key == "lambda") {
    cfg.lam = parse_real(key, value);
  } else if (key == "step_size") {
    cfg.step_size = parse_real(key, value);
  } else if (key == "anneal") {
    cfg.anneal = parse_bool(key, value);
  } else if (key == "anneal_epsilon") {
    cfg.anneal_epsilon = parse_bool(key, value);
  } else if (key == "anneal_entropy") {
    cfg.anneal_entropy = parse_bool(key, value);
  } else if (key == "epsilon") {
    cfg.objective.epsilon = parse_real(key, value);
  } else if (key == "beta") {
    cfg.objective.beta = parse_real(key, value);
  } else if (key == "d_targ") {
    cfg.objective.d_targ = parse_real(key, value);
  } else if (key == "mu" || key == "barrier_beta") {
    // The appendix tables label the barrier coefficient beta; same knob.
    cfg.objective.mu = parse_real(key, value);
  } else if (key == "delta") {
    cfg.objective.delta = parse_real(key, value);
  } else if (key == "vf_coeff") {
    cfg.objective.vf_coeff = parse_real(key, value);
  } else if (key == "entropy_coeff") {
    cfg.objective.entropy_coeff = parse_real(key, value);
  } else if (key == "barrier_floor") {
    cfg.objective.barrier_floor = parse_real(key, value);
  } else if (key == "eval_every") {
    cfg.eval_every = static_cast<int>(parse_int(key, value));
  } else if (key == "eval_episodes") {
    cfg.eval_episodes = static_cast<int>(parse_int(key, value));
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
  } else if (key == "dump_batches") {
    cfg.dump_batches = parse_bool(key, value);
  } else if (key == "hidden_width") {
    cfg.hidden_width = static_cast<int>(parse_int(key, value));
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

TrainerConfig parse_config_text(const std::string& text) {
  TrainerConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config: line " + std::to_string(line_no) + ": empty key or value");
    apply_override(cfg, key, value);
  }
  return cfg;
}

TrainerConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const TrainerConfig& cfg) {
  std::ostringstream out;
  if (!cfg.preset.empty()) out << "preset = " << cfg.preset << "\n";
  out << "env = " << cfg.env_id << "\n";
  out << "objective = " << to_string(cfg.objective.kind) << "\n";
  out << "iterations = " << cfg.iterations << "\n";
  out << "actors = " << cfg.actors << "\n";
  out << "horizon = " << cfg.horizon << "\n";
  out << "epochs = " << cfg.epochs << "\n";
  out << "minibatch = " << cfg.minibatch << "\n";
  out << "gamma = " << fmt_double(cfg.gamma) << "\n";
  out << "lambda = " << fmt_double(cfg.lam) << "\n";
  out << "step_size = " << fmt_double(cfg.step_size) << "\n";
  out << "anneal = " << (cfg.anneal ? "true" : "false") << "\n";
  out << "anneal_epsilon = " << (cfg.anneal_epsilon ? "true" : "false") << "\n";
  out << "anneal_entropy = " << (cfg.anneal_entropy ? "true" : "false") << "\n";
  out << "epsilon = " << fmt_double(cfg.objective.epsilon) << "\n";
  out << "beta = " << fmt_double(cfg.objective.beta) << "\n";
  out << "d_targ = " << fmt_double(cfg.objective.d_targ) << "\n";
  out << "mu = " << fmt_double(cfg.objective.mu) << "\n";
  out << "delta = " << fmt_double(cfg.objective.delta) << "\n";
  out << "vf_coeff = " << fmt_double(cfg.objective.vf_coeff) << "\n";
  out << "entropy_coeff = " << fmt_double(cfg.objective.entropy_coeff) << "\n";
  out << "barrier_floor = " << fmt_double(cfg.objective.barrier_floor) << "\n";
  out << "eval_every = " << cfg.eval_every << "\n";
  out << "eval_episodes = " << cfg.eval_episodes << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "dump_batches = " << (cfg.dump_batches ? "true" : "false") << "\n";
  out << "hidden_width = " << cfg.hidden_width << "\n";
  return out.str();
}

void apply_env_overrides(TrainerConfig& cfg) {
  static const char* keys[] = {
      "env",          "objective",     "iterations",   "actors",        "horizon",
      "epochs",       "minibatch",     "gamma",        "lambda",        "step_size",
      "anneal",       "anneal_epsilon", "anneal_entropy", "epsilon",    "beta",
      "d_targ",       "mu",            "barrier_beta", "delta",         "vf_coeff",
      "entropy_coeff", "barrier_floor", "eval_every",  "eval_episodes", "seed",
      "dump_batches", "hidden_width"};
  for (const char* key : keys) {
    std::string env_name = "PPOB_";
    for (const char* p = key; *p; ++p)
      env_name += static_cast<char>(std::toupper(static_cast<unsigned char>(*p)));
    if (const char* value = std::getenv(env_name.c_str())) apply_override(cfg, key, value);
  }
}

std::string make_run_dir(const std::string& root, const TrainerConfig& cfg, bool force) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  const std::string name = cfg.env_id + "_" + to_string(cfg.objective.kind) + "_" +
                           std::to_string(cfg.seed) + "_" + timestamp_now();
  const fs::path dir = fs::path(root) / name;
  if (fs::exists(dir)) {
    if (!force) throw UsageError("run directory exists (use --force): " + dir.string());
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
  return dir.string();
}

void write_run_manifest(const std::string& run_dir, const TrainerConfig& cfg,
                        const std::string& status) {
  {
    std::ofstream out(run_dir + "/config.resolved");
    if (!out) throw UsageError("manifest: cannot write config.resolved in " + run_dir);
    out << serialize_config(cfg);
  }
  std::ofstream out(run_dir + "/manifest.txt");
  if (!out) throw UsageError("manifest: cannot write manifest.txt in " + run_dir);
  out << "ppob-run-manifest v1\n";
  out << "version = " << kLibraryVersion << "\n";
  out << "created = " << timestamp_now() << "\n";
  out << "preset = " << (cfg.preset.empty() ? "(none)" : cfg.preset) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "config = config.resolved\n";
  out << "metrics = metrics.csv\n";
  out << "objective_reports = objective_reports.csv\n";
  out << "checkpoint = checkpoint.txt\n";
  out << "status = " << status << "\n";
}

void finalize_run_manifest(const std::string& run_dir, const std::string& status) {
  std::ofstream out(run_dir + "/manifest.txt", std::ios::app);
  if (!out) throw UsageError("manifest: cannot finalize manifest.txt in " + run_dir);
  out << "status = " << status << "\n";
  out << "finished = " << timestamp_now() << "\n";
}

TrainerConfig load_run_config(const std::string& run_dir) {
  return parse_config_file(run_dir + "/config.resolved");
}

}  // namespace ppob
