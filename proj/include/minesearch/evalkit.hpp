#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "minesearch/env.hpp"
#include "minesearch/nn.hpp"
#include "minesearch/world.hpp"

namespace minesearch {

// One pose per step plus the start pose. Stored in float so that the
// 9-significant-digit CSV text is lossless.
struct PathPoint {
  float t = 0;
  float x = 0;
  float y = 0;
  float z = 0;
  float reward = 0;      // reward received on arriving at this pose
  float cum_reward = 0;

  bool operator==(const PathPoint&) const = default;
};

struct EpisodeRecord {
  std::uint64_t seed = 0;
  std::string variant;
  int steps = 0;
  DoneReason done_reason = DoneReason::running;
  std::vector<PathPoint> uav_path;
  std::vector<PathPoint> ugv_path;  // z = 0
  double return_uav = 0;
  double return_ugv = 0;
  bool uav_arrived = false;
  bool success = false;
};

enum class EvalMode {
  system,    // both policies act; success = UGV arrival
  uav_only,  // UGV held; success = UAV arrival
};
const char* to_string(EvalMode m);

struct InferenceOptions {
  int episodes = 1000;
  std::uint64_t seed = 0;
  bool stochastic = false;  // sample instead of taking the distribution mode
  int batch = 50;           // episodes run in lockstep
  bool record_paths = true;
};

// Episode j uses world seed derive_seed(seed, "eval", j); results are in
// episode order regardless of batching. `ugv` may be null in uav_only mode.
std::vector<EpisodeRecord> run_inference(const EnvConfig& env, const ActorCritic<float>& uav,
                                         const ActorCritic<float>* ugv, EvalMode mode,
                                         const InferenceOptions& options);
std::uint64_t eval_episode_seed(std::uint64_t seed, int episode);

struct Interval {
  double lower = 0;
  double upper = 0;
};

// 95% Wilson score interval; exact 0 / 1 bounds at the extremes.
Interval wilson_interval(long successes, long trials);

struct Metrics {
  long episodes = 0;
  long successes = 0;
  double success_rate = 0;
  double uav_arrival_rate = 0;
  double mean_steps_success = 0;  // NaN without successes
  double collision_rate = 0;
  double timeout_rate = 0;
  Interval interval;
};

Metrics compute_metrics(const std::vector<EpisodeRecord>& records);
// "89.1%": one decimal, rounded half away from zero.
std::string format_percent(double rate);
std::string metrics_table(const Metrics& m);
std::string metrics_key_values(const Metrics& m);

void write_trajectory_csv(const EpisodeRecord& r, const std::string& path);
std::string trajectory_csv(const EpisodeRecord& r);
// Parses paths, rewards, steps and done reason back from the CSV text.
EpisodeRecord parse_trajectory_csv(const std::string& text);
EpisodeRecord read_trajectory_csv(const std::string& path);

// Top view of the world with walls as lines, obstacles as polygons and the
// target as a circle; each record adds a UAV and a UGV path. World units.
std::string render_trajectory_svg(const WorldGeometry& world, const std::vector<EpisodeRecord>& records);

struct CurvePoint {
  double step = 0;
  double value = 0;
};
struct CurveSeries {
  std::string run;
  std::string agent;
  std::vector<CurvePoint> points;
};
// Mean return per (run, agent) from a metrics TSV; rows with NaN are skipped.
std::vector<CurveSeries> read_metrics_curves(const std::string& tsv_text, const std::string& column = "mean_return");
std::string render_curves_svg(const std::vector<CurveSeries>& series, const std::string& title);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace minesearch
