#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "minesearch/rng.hpp"
#include "minesearch/vehicles.hpp"
#include "minesearch/world.hpp"

namespace minesearch {

using ObsVec = Eigen::VectorXd;

inline constexpr int kBeams = 19;
inline constexpr int kUavObsDim = 68;
inline constexpr int kUgvObsDim = 33;
inline constexpr int kUavActionDim = 4;

// Layout of the UAV observation vector.
namespace uav_obs {
inline constexpr int ring = 0;        // 19 normalized distances
inline constexpr int scan = 19;       // 19 x (normalized distance, target flag)
inline constexpr int position = 57;   // 3, meters
inline constexpr int quaternion = 60; // 4, (w, x, y, z)
inline constexpr int prev_cmd = 64;   // 4
}  // namespace uav_obs

// Layout of the UGV observation vector.
namespace ugv_obs {
inline constexpr int lidar = 0;       // 19 normalized distances
inline constexpr int rel_uav = 19;    // 2, (forward, left) in the UGV frame
inline constexpr int rel_angle = 21;  // 1, rad, left positive
inline constexpr int position = 22;   // 2, meters
inline constexpr int heading = 24;    // 1, rad
inline constexpr int prev_action = 25;  // 8, one-hot
}  // namespace ugv_obs

struct RewardParams {
  double r_arrive_uav = 7000.0;
  double r_collision_uav = -7000.0;
  double r_forward = 0.5;
  double alpha = 5000.0;
  double r_collision_ugv = -15000.0;
  double r_distance = 5.0;
  double r_follow = -20.0;
  double c_r1 = 4000.0;
  double c_r2 = 8000.0;
  double r_arrive_ugv = 3000.0;
  double r_time = -0.1;
  double theta1 = 2.0;  // m, arrival radius on the plane
  double theta2 = 6.0;  // m, UGV-UAV formation radius on the plane
};

void validate(const RewardParams& p);

// Bit flags naming the reward cases that fired on a step.
enum RewardCase : unsigned {
  case_arrive = 1u << 0,
  case_collision = 1u << 1,
  case_forward = 1u << 2,     // UAV only
  case_approach = 1u << 3,    // past the crossroad, shaped by distance to target
  case_distance = 1u << 4,    // UGV only
  case_follow = 1u << 5,      // UGV only
  case_progress = 1u << 6,    // UGV only, before the crossroad
  case_time = 1u << 7,
};

struct RewardResult {
  double value = 0.0;
  bool terminal = false;
  unsigned cases = 0;
};

// Arrival and collision end the agent's episode; when either fires the
// shaping cases are skipped and only the time penalty is added.
RewardResult uav_reward(const RewardParams& p, double x_cross, double d_cross, bool collision, double d_t,
                        double x_t, double x_prev);
RewardResult ugv_reward(const RewardParams& p, double x_cross, double d_cross, bool collision, double d_t,
                        double d_to_uav, double x_ugv, double x_uav);

// Formats the active cases as "name:value,..." in evaluation order.
std::string describe_cases(const RewardParams& p, const RewardResult& r, bool uav, double x_cross,
                           double d_cross, double d_t, double x_agent);

enum class DoneReason { running, uav_arrived, uav_collision, ugv_arrived, ugv_collision, timeout };
const char* to_string(DoneReason r);
DoneReason parse_done_reason(const std::string& text);

struct EnvConfig {
  EnvVariant variant = EnvVariant::original();
  WorldLayout layout;
  VehicleParams vehicles;
  RewardParams rewards;
  UavMode uav_mode = UavMode::planar;
  int step_limit = 1500;
  double lidar_range = 20.0;
  double scan_pitch_deg = -30.0;
  Vec3 uav_start{2.0, 0.0, -3.0};
  Vec2 ugv_start{2.0, 0.0};
  double start_lateral_jitter = 0.0;  // m, uniform +- on y at reset
  double start_yaw_jitter = 0.0;      // deg, uniform +- at reset
  bool debug_log = false;
};

void validate(const EnvConfig& c);

// Sensor models. Beam order is left to right in the body frame.
ObsVec assemble_uav_obs(const WorldGeometry& world, const UavState& uav, const Vec4& prev_cmd,
                        const EnvConfig& config);
ObsVec assemble_ugv_obs(const WorldGeometry& world, const UgvState& ugv, const UavState& uav, int prev_action,
                        const EnvConfig& config);
// Direction of beam `i` (0..18) in the body frame, pitched by `pitch_deg` (negative looks down).
Vec3 beam_direction_body(int i, double pitch_deg);

// UAV position (x, forward; y, left) relative to the UGV in its ego frame.
Vec2 relative_in_ego(const UgvState& ugv, const Vec2& point);

struct StepResult {
  ObsVec uav_obs;
  ObsVec ugv_obs;
  double reward_uav = 0.0;
  double reward_ugv = 0.0;
  unsigned cases_uav = 0;
  unsigned cases_ugv = 0;
  // Whether each agent acted on this step, i.e. produced a transition.
  bool uav_stepped = false;
  bool ugv_stepped = false;
  // Agent reached a true terminal state (arrival or collision) on this step.
  bool uav_terminal = false;
  bool ugv_terminal = false;
  bool uav_arrived = false;
  bool done = false;
  bool truncated = false;  // done by timeout; value should bootstrap
  DoneReason done_reason = DoneReason::running;
};

// Mutable part of an instance; enough to resume it exactly.
struct InstanceState {
  std::uint64_t episode_seed = 0;
  std::uint64_t episode_index = 0;
  UavState uav;
  UgvState ugv;
  Vec4 prev_cmd = Vec4::Zero();
  int prev_action = 0;
  int steps = 0;
  bool uav_active = true;
  bool uav_arrived = false;
  bool done = false;
  DoneReason done_reason = DoneReason::running;
  double return_uav = 0.0;
  double return_ugv = 0.0;
};

class EnvInstance {
 public:
  explicit EnvInstance(EnvConfig config);

  // Starts an episode whose world and start pose come from `episode_seed`.
  void reset(std::uint64_t episode_seed);
  // Steps both vehicles. `ugv_action` is 1..8 or kUgvHold; with hold the UGV
  // is not moved and the UAV's arrival ends the episode.
  StepResult step(const UavCommand& cmd, int ugv_action);

  ObsVec uav_obs() const;
  ObsVec ugv_obs() const;

  const WorldGeometry& world() const { return world_; }
  const EnvConfig& config() const { return config_; }
  const InstanceState& state() const { return state_; }
  // Restores a saved state; the world is rebuilt from the episode seed.
  void restore(const InstanceState& s);

  // Per-step debug lines ("step=.. agent=.. ..."), if enabled.
  const std::vector<std::string>& debug_lines() const { return debug_; }
  void clear_debug() { debug_.clear(); }

 private:
  EnvConfig config_;
  WorldGeometry world_;
  InstanceState state_;
  std::vector<std::string> debug_;
};

bool uav_collides(const WorldGeometry& world, const EnvConfig& config, const UavState& before,
                  const UavState& after);
bool ugv_collides(const WorldGeometry& world, const EnvConfig& config, const UgvState& before,
                  const UgvState& after);

struct BatchStep {
  std::vector<StepResult> results;   // obs already replaced by reset obs when done
  std::vector<ObsVec> terminal_uav_obs;  // obs at the end of finished episodes (empty when running)
  std::vector<ObsVec> terminal_ugv_obs;
  // Finished episode returns and reasons, in instance order.
  struct Finished {
    int instance;
    double return_uav;
    double return_ugv;
    bool uav_arrived;
    int steps;
    DoneReason reason;
  };
  std::vector<Finished> finished;
};

// N instances stepped in lockstep and auto-reset. Instance i's k-th episode
// uses a seed derived from (master seed, i, k).
class VectorEnv {
 public:
  VectorEnv(EnvConfig config, int num_instances, std::uint64_t master_seed, int workers = 1);

  int size() const { return static_cast<int>(instances_.size()); }
  void reset_all();
  BatchStep step(const std::vector<UavCommand>& cmds, const std::vector<int>& ugv_actions);

  const EnvInstance& instance(int i) const { return instances_[static_cast<std::size_t>(i)]; }
  std::uint64_t master_seed() const { return master_seed_; }
  static std::uint64_t episode_seed(std::uint64_t master, int instance, std::uint64_t episode);

  std::vector<InstanceState> save() const;
  void restore(const std::vector<InstanceState>& states);

 private:
  std::vector<EnvInstance> instances_;
  std::uint64_t master_seed_;
  int workers_;
};

// One line per instance state, floats in hex so restoring is exact.
std::string serialize(const InstanceState& s);
InstanceState deserialize_instance(const std::string& line);

}  // namespace minesearch
