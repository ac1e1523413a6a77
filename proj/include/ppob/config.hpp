#ifndef PPOB_CONFIG_HPP_
#define PPOB_CONFIG_HPP_

#include <string>
#include <vector>

#include "ppob/trainer.hpp"

namespace ppob {

extern const char kLibraryVersion[];

// Named hyperparameter presets baked into the binary: "atari-style",
// "mujoco-style", "corridor-fast".
TrainerConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

// One "key = value" assignment; unknown keys are rejected with the key
// named. "preset" resolves the named preset in place; "barrier_beta" is an
// accepted alias for "mu".
void apply_override(TrainerConfig& cfg, const std::string& key, const std::string& value);

// Plain-text config: '#' comments, blank lines ignored, "key = value" rows.
TrainerConfig parse_config_file(const std::string& path);
TrainerConfig parse_config_text(const std::string& text);

// Full resolved key set; parse(serialize(cfg)) reproduces cfg exactly.
std::string serialize_config(const TrainerConfig& cfg);

// PPOB_<UPPERCASED KEY> environment variables, applied between config file
// and command-line flags.
void apply_env_overrides(TrainerConfig& cfg);

// Run directory <env>_<objective>_<seed>_<timestamp> under root; refuses an
// existing directory unless force.
std::string make_run_dir(const std::string& root, const TrainerConfig& cfg, bool force);

// manifest.txt plus config.resolved inside the run directory. The manifest
// is written with status "running" before training and finalized after.
void write_run_manifest(const std::string& run_dir, const TrainerConfig& cfg,
                        const std::string& status);
void finalize_run_manifest(const std::string& run_dir, const std::string& status);

// Reads the config snapshot a manifest points at (config.resolved).
TrainerConfig load_run_config(const std::string& run_dir);

}  // namespace ppob

#endif  // PPOB_CONFIG_HPP_
