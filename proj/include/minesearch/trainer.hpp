#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "minesearch/agents.hpp"
#include "minesearch/config.hpp"
#include "minesearch/env.hpp"
#include "minesearch/ppo.hpp"

namespace minesearch {

// Windowed reward gate between the stages. Rewards arrive one instance-step
// at a time; every window_steps of them close a window whose mean is judged.
struct GateState {
  int counter = 0;          // consecutive passing windows, capped at required
  double accumulator = 0;   // reward sum of the open window
  int fill = 0;             // instance-steps in the open window
  long long windows = 0;
  bool passed = false;
};

// Judges one complete window: counter + 1 when mean >= threshold, else 0.
// Returns whether the gate has now passed.
bool gate_update(GateState& g, const GateConfig& c, double window_mean);

struct GateWindow {
  long long index = 0;
  double mean = 0;
  int counter = 0;
  bool passed = false;
};

// Adds one instance-step reward; returns the judged window if this closed one.
std::optional<GateWindow> gate_feed(GateState& g, const GateConfig& c, double reward);

enum class Stage { stage1, stage2, done };
const char* to_string(Stage s);
Stage parse_stage(const std::string& text);

struct Learner {
  Agent agent = Agent::uav;
  ActorCritic<float> net;
  Adam<float> opt;
  std::unique_ptr<Icm<float>> icm;  // null when curiosity is off
  Adam<float> icm_opt;
  Rng sampler;
  Rng shuffle;
  long long updates = 0;
};

struct TrainOptions {
  bool verbose = false;                       // mirror metric rows to stdout
  long long max_updates = -1;                 // pause after this many updates in this session
  std::function<void(const std::string&)> log;  // progress lines; null = silent
};

enum class RunStatus { completed, gate_timeout, paused };

struct TrainResult {
  RunStatus status = RunStatus::completed;
  Stage stage = Stage::stage1;
  long long global_step = 0;
  long long stage2_step = 0;
  int gate_counter = 0;
  std::string message;
};

struct ProbeRow {
  Stage stage = Stage::stage1;
  long long step = 0;
  int episodes = 0;
  double uav_success = 0;
  double ugv_success = 0;  // NaN in stage 1
};

// Two-stage trainer. Stage 1 trains the UAV with the UGV held until the gate
// passes; stage 2 trains both. All randomness derives from config.seed.
// Output files in config.out: config.cfg, metrics.tsv, probe.tsv, gate.txt,
// checkpoint.ckpt (checkpoint-<update>.ckpt when kept) and final.ckpt.
class Trainer {
 public:
  Trainer(RunConfig config, TrainOptions options = {});
  // Continues a run from a checkpoint. Output files are truncated to the
  // checkpoint step so the streams read as one uninterrupted run.
  static Trainer resume(const std::string& checkpoint_path, TrainOptions options = {},
                        const std::string& out_dir = "");

  TrainResult run();
  // One rollout and update; false once the run is over.
  bool iterate();

  void save_checkpoint(const std::string& path) const;
  std::string checkpoint_bytes() const;

  const RunConfig& config() const { return config_; }
  Stage stage() const { return stage_; }
  long long global_step() const { return global_step_; }
  long long stage2_step() const { return stage2_step_; }
  const GateState& gate() const { return gate_; }
  const Learner& uav() const { return uav_; }
  const Learner& ugv() const { return ugv_; }
  const VectorEnv& env() const { return *env_; }
  const std::vector<ProbeRow>& probes() const { return probes_; }
  // Parameter hash of the UAV at the moment stage 2 began (0 before).
  std::uint64_t handoff_hash() const { return handoff_hash_; }

 private:
  Trainer(RunConfig config, TrainOptions options, bool fresh);

  void open_outputs(bool append);
  void enter_stage2();
  void run_probe();
  void write_checkpoints(bool final);
  bool finished() const;
  bool stage1_exhausted() const;
  void log(const std::string& line) const;

  RunConfig config_;
  TrainOptions options_;
  Stage stage_ = Stage::stage1;
  long long global_step_ = 0;
  long long stage2_step_ = 0;
  long long next_probe_ = 0;
  long long session_updates_ = 0;
  long long total_updates_ = 0;
  std::uint64_t handoff_hash_ = 0;
  GateState gate_;
  Learner uav_;
  Learner ugv_;
  std::unique_ptr<VectorEnv> env_;
  std::vector<ProbeRow> probes_;
  std::string out_;
};

// Reads a checkpoint's manifest and tensors; throws CheckpointError on a bad
// header, version, checksum or layout.
struct CheckpointInfo {
  std::string manifest;
  RunConfig config;
  Stage stage = Stage::stage1;
  long long global_step = 0;
};
CheckpointInfo read_checkpoint_info(const std::string& path);
// Refuses a checkpoint written under a different configuration.
void check_checkpoint_config(const std::string& path, const RunConfig& expected);

// Loads both policies from a checkpoint; `has_ugv` reports whether the UGV
// policy was ever updated.
void load_policies(const std::string& path, ActorCritic<float>& uav, ActorCritic<float>& ugv, bool& has_ugv);

}  // namespace minesearch
