#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "minesearch/env.hpp"
#include "minesearch/icm.hpp"
#include "minesearch/nn.hpp"
#include "minesearch/ppo.hpp"

namespace minesearch {

struct AgentConfig {
  PpoConfig ppo;
  IcmConfig icm;
  LrSchedule schedule;  // total_steps follows run.max_step
  int hidden = 256;
  double log_std_init = -0.5;
};

struct GateConfig {
  int window_steps = 10000;
  double threshold = 5000.0;      // mean per-step UAV reward over a window
  int required_consecutive = 50;
  long long stage1_ceiling = 20000000;
};

struct ProbeConfig {
  long long interval = 0;  // environment steps between probes; 0 disables
  int episodes = 100;
};

struct RunConfig {
  EnvConfig env;
  AgentConfig uav;
  AgentConfig ugv;
  GateConfig gate;
  ProbeConfig probe;
  std::string name = "main";
  std::uint64_t seed = 0;
  std::string out = "run";
  int num_instances = 30;
  int workers = 1;
  long long max_step = 10000000;  // stage-2 environment steps
  long long total_steps = 0;      // overall cap across stages; 0 = none
  int checkpoint_every = 10;      // updates; 0 = only at the end
  bool keep_checkpoints = false;
  bool simultaneous_baseline = false;
  bool stage1_only = false;       // end after stage 1 instead of entering stage 2
};

// Default hyperparameters for both agents.
RunConfig default_config();

void validate(const RunConfig& c);

// Strict parser: `key = value` lines, `[section]` headers prefixing the
// following keys, `#` comments. Unknown keys, bad values and range
// violations raise ConfigError naming the key and line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
// Every field, one `section.key = value` line each; parse_config reads it back
// to an identical config.
std::string print_config(const RunConfig& c);
std::uint64_t config_hash(const RunConfig& c);

// Applies MINESEARCH_<SECTION>_<KEY> variables (dots become underscores,
// upper case). `lookup` returns nullptr for unset names.
void apply_env_overrides(RunConfig& c, const std::function<const char*(const std::string&)>& lookup);
void apply_env_overrides(RunConfig& c);

// All known keys in print order.
std::vector<std::string> config_keys();
std::size_t edit_distance(const std::string& a, const std::string& b);

}  // namespace minesearch
