#include "minesearch/env.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <thread>

#include "minesearch/errors.hpp"
#include "minesearch/format.hpp"

namespace minesearch {

namespace {

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

void check_lidar(const ObsVec& obs, int begin, int count, int stride, const char* agent) {
  for (int i = 0; i < count; ++i) {
    const double v = obs[begin + i * stride];
    if (!(v >= 0.0 && v <= 1.0))
      throw ObservationError(std::string(agent) + " lidar entry " + std::to_string(i) + " outside [0, 1]");
  }
}

}  // namespace

void validate(const RewardParams& p) {
  const double all[] = {p.r_arrive_uav, p.r_collision_uav, p.r_forward, p.alpha, p.r_collision_ugv,
                        p.r_distance, p.r_follow, p.c_r1, p.c_r2, p.r_arrive_ugv, p.r_time,
                        p.theta1, p.theta2};
  for (double v : all)
    if (!std::isfinite(v)) throw ConfigError("reward parameters must be finite");
  if (!(p.theta1 > 0.0)) throw ConfigError("rewards.theta1 must be > 0");
  if (!(p.theta2 > 0.0)) throw ConfigError("rewards.theta2 must be > 0");
}

RewardResult uav_reward(const RewardParams& p, double x_cross, double d_cross, bool collision, double d_t,
                        double x_t, double x_prev) {
  RewardResult r;
  if (d_t < p.theta1) {
    r.value += p.r_arrive_uav;
    r.cases |= case_arrive;
    r.terminal = true;
  }
  if (collision) {
    r.value += p.r_collision_uav;
    r.cases |= case_collision;
    r.terminal = true;
  }
  if (!r.terminal) {
    if (x_prev < x_t && x_t < x_cross) {
      r.value += p.r_forward;
      r.cases |= case_forward;
    }
    if (x_t > x_cross) {
      r.value += p.alpha * (d_cross - d_t) / d_cross;
      r.cases |= case_approach;
    }
  }
  r.value += p.r_time;
  r.cases |= case_time;
  return r;
}

RewardResult ugv_reward(const RewardParams& p, double x_cross, double d_cross, bool collision, double d_t,
                        double d_to_uav, double x_ugv, double x_uav) {
  RewardResult r;
  if (d_t < p.theta1) {
    r.value += p.r_arrive_ugv;
    r.cases |= case_arrive;
    r.terminal = true;
  }
  if (collision) {
    r.value += p.r_collision_ugv;
    r.cases |= case_collision;
    r.terminal = true;
  }
  if (!r.terminal) {
    if (d_to_uav < p.theta2) {
      r.value += p.r_distance;
      r.cases |= case_distance;
    }
    if (x_ugv > x_uav) {
      r.value += p.r_follow;
      r.cases |= case_follow;
    }
    if (x_ugv < x_cross) {
      r.value += p.c_r1 * x_ugv / x_cross;
      r.cases |= case_progress;
    }
    if (x_ugv > x_cross) {
      r.value += p.c_r1 + p.c_r2 * (d_cross - d_t) / d_cross;
      r.cases |= case_approach;
    }
  }
  r.value += p.r_time;
  r.cases |= case_time;
  return r;
}

std::string describe_cases(const RewardParams& p, const RewardResult& r, bool uav, double x_cross,
                           double d_cross, double d_t, double x_agent) {
  std::string out;
  auto add = [&out](const char* name, double v) {
    if (!out.empty()) out += ',';
    out += name;
    out += ':';
    out += fmt_exact(v);
  };
  if (r.cases & case_arrive) add("arrive", uav ? p.r_arrive_uav : p.r_arrive_ugv);
  if (r.cases & case_collision) add("collision", uav ? p.r_collision_uav : p.r_collision_ugv);
  if (r.cases & case_forward) add("forward", p.r_forward);
  if (r.cases & case_distance) add("distance", p.r_distance);
  if (r.cases & case_follow) add("follow", p.r_follow);
  if (r.cases & case_progress) add("progress", p.c_r1 * x_agent / x_cross);
  if (r.cases & case_approach)
    add("approach", uav ? p.alpha * (d_cross - d_t) / d_cross : p.c_r1 + p.c_r2 * (d_cross - d_t) / d_cross);
  if (r.cases & case_time) add("time", p.r_time);
  return out;
}

const char* to_string(DoneReason r) {
  switch (r) {
    case DoneReason::uav_arrived: return "uav_arrived";
    case DoneReason::uav_collision: return "uav_collision";
    case DoneReason::ugv_arrived: return "ugv_arrived";
    case DoneReason::ugv_collision: return "ugv_collision";
    case DoneReason::timeout: return "timeout";
    case DoneReason::running: break;
  }
  return "running";
}

DoneReason parse_done_reason(const std::string& text) {
  for (DoneReason r : {DoneReason::running, DoneReason::uav_arrived, DoneReason::uav_collision,
                       DoneReason::ugv_arrived, DoneReason::ugv_collision, DoneReason::timeout})
    if (text == to_string(r)) return r;
  throw IoError("unknown done reason '" + text + "'");
}

void validate(const EnvConfig& c) {
  validate(c.variant, c.layout);
  validate(c.rewards);
  if (c.step_limit < 1) throw ConfigError("env.step_limit must be >= 1");
  if (!(c.lidar_range > 0.0) || !std::isfinite(c.lidar_range)) throw ConfigError("env.lidar_range must be > 0");
  if (!(c.vehicles.dt > 0.0 && c.vehicles.dt <= 0.1)) throw ConfigError("vehicles.dt must lie in (0, 0.1]");
  if (!(c.vehicles.h_min < c.vehicles.h_max)) throw ConfigError("vehicles.h_min must be below vehicles.h_max");
  if (!(c.vehicles.uav_radius > 0.0) || !(c.vehicles.ugv_radius > 0.0))
    throw ConfigError("vehicle radii must be > 0");
  if (c.start_lateral_jitter < 0.0 || c.start_yaw_jitter < 0.0) throw ConfigError("start jitter must be >= 0");
}

Vec3 beam_direction_body(int i, double pitch_deg) {
  const double yaw = deg2rad(-90.0 + 10.0 * i);
  const double pitch = deg2rad(pitch_deg);
  // Body z points down, so a negative pitch gives a positive z component.
  return Vec3(std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), -std::sin(pitch));
}

ObsVec assemble_uav_obs(const WorldGeometry& world, const UavState& uav, const Vec4& prev_cmd,
                        const EnvConfig& config) {
  ObsVec obs(kUavObsDim);
  for (int i = 0; i < kBeams; ++i) {
    Vec3 ring = uav.R * beam_direction_body(i, 0.0);
    ring.normalize();
    obs[uav_obs::ring + i] = raycast(world, uav.p_w, ring, config.lidar_range).normalized_distance;
    Vec3 scan = uav.R * beam_direction_body(i, config.scan_pitch_deg);
    scan.normalize();
    const RayHit hit = raycast(world, uav.p_w, scan, config.lidar_range);
    obs[uav_obs::scan + 2 * i] = hit.normalized_distance;
    obs[uav_obs::scan + 2 * i + 1] = hit.hit_kind == HitKind::target ? 1.0 : 0.0;
  }
  obs.segment<3>(uav_obs::position) = uav.p_w;
  obs.segment<4>(uav_obs::quaternion) = quaternion_wxyz(uav.R);
  obs.segment<4>(uav_obs::prev_cmd) = prev_cmd;
  check_lidar(obs, uav_obs::ring, kBeams, 1, "UAV ring");
  check_lidar(obs, uav_obs::scan, kBeams, 2, "UAV scan");
  if (!obs.allFinite()) throw ObservationError("UAV observation is not finite");
  return obs;
}

Vec2 relative_in_ego(const UgvState& ugv, const Vec2& point) {
  const Vec2 d = point - ugv.position;
  const double c = std::cos(ugv.heading);
  const double s = std::sin(ugv.heading);
  // With y to the right of x, the left-hand normal of (c, s) is (s, -c).
  return {c * d.x() + s * d.y(), s * d.x() - c * d.y()};
}

ObsVec assemble_ugv_obs(const WorldGeometry& world, const UgvState& ugv, const UavState& uav, int prev_action,
                        const EnvConfig& config) {
  ObsVec obs = ObsVec::Zero(kUgvObsDim);
  const Vec3 origin(ugv.position.x(), ugv.position.y(), -config.vehicles.ugv_sensor_height);
  const Mat3 r = yaw_rotation(ugv.heading);
  for (int i = 0; i < kBeams; ++i) {
    Vec3 d = r * beam_direction_body(i, 0.0);
    d.normalize();
    obs[ugv_obs::lidar + i] =
        raycast(world, origin, d, config.lidar_range, ray_walls | ray_obstacles).normalized_distance;
  }
  const Vec2 rel = relative_in_ego(ugv, uav.p_w.head<2>());
  obs.segment<2>(ugv_obs::rel_uav) = rel;
  obs[ugv_obs::rel_angle] = std::atan2(rel.y(), rel.x());
  obs.segment<2>(ugv_obs::position) = ugv.position;
  obs[ugv_obs::heading] = ugv.heading;
  if (prev_action >= 1 && prev_action <= kUgvActionCount) obs[ugv_obs::prev_action + prev_action - 1] = 1.0;
  check_lidar(obs, ugv_obs::lidar, kBeams, 1, "UGV");
  if (!obs.allFinite()) throw ObservationError("UGV observation is not finite");
  return obs;
}

bool uav_collides(const WorldGeometry& world, const EnvConfig& config, const UavState& before,
                  const UavState& after) {
  const double radius = config.vehicles.uav_radius;
  if (check_collision(world, after.p_w, radius)) return true;
  if (crosses_wall(world, before.p_w.head<2>(), after.p_w.head<2>())) return true;
  // Flying over a wall top leaves the mine; treat as a crash like hitting the ground.
  if (!point_in_polygon(world.free_space_polygon, after.p_w.head<2>())) return true;
  return -after.p_w.z() < radius;
}

bool ugv_collides(const WorldGeometry& world, const EnvConfig& config, const UgvState& before,
                  const UgvState& after) {
  const double radius = config.vehicles.ugv_radius;
  const Vec3 center(after.position.x(), after.position.y(), -radius);
  if (check_collision(world, center, radius)) return true;
  if (crosses_wall(world, before.position, after.position)) return true;
  return !point_in_polygon(world.free_space_polygon, after.position);
}

EnvInstance::EnvInstance(EnvConfig config) : config_(std::move(config)) {
  validate(config_);
  reset(0);
}

void EnvInstance::reset(std::uint64_t episode_seed) {
  const std::uint64_t index = state_.episode_index;
  world_ = build_world(config_.variant, config_.layout, episode_seed);
  Rng rng = Rng::stream(episode_seed, "start");
  InstanceState s;
  s.episode_seed = episode_seed;
  s.episode_index = index;
  const double uav_dy = rng.uniform(-1.0, 1.0) * config_.start_lateral_jitter;
  const double uav_yaw = deg2rad(rng.uniform(-1.0, 1.0) * config_.start_yaw_jitter);
  const double ugv_dy = rng.uniform(-1.0, 1.0) * config_.start_lateral_jitter;
  const double ugv_yaw = deg2rad(rng.uniform(-1.0, 1.0) * config_.start_yaw_jitter);
  s.uav.p_w = config_.uav_start + Vec3(0.0, uav_dy, 0.0);
  s.uav.yaw = uav_yaw;
  s.uav.R = yaw_rotation(uav_yaw);
  s.ugv.position = config_.ugv_start + Vec2(0.0, ugv_dy);
  s.ugv.heading = ugv_yaw;
  state_ = s;
  debug_.clear();
}

void EnvInstance::restore(const InstanceState& s) {
  world_ = build_world(config_.variant, config_.layout, s.episode_seed);
  state_ = s;
}

ObsVec EnvInstance::uav_obs() const { return assemble_uav_obs(world_, state_.uav, state_.prev_cmd, config_); }

ObsVec EnvInstance::ugv_obs() const {
  return assemble_ugv_obs(world_, state_.ugv, state_.uav, state_.prev_action, config_);
}

StepResult EnvInstance::step(const UavCommand& cmd, int ugv_action_id) {
  if (state_.done) throw LifecycleError("step called on a finished episode; reset first");
  const bool hold = ugv_action_id == kUgvHold;
  UgvAction action;
  if (!hold) action = ugv_action(ugv_action_id);
  if (!cmd.a.allFinite()) throw ActionError("UAV command has non-finite components");

  const RewardParams& rp = config_.rewards;
  const Vec2 target = world_.target_position;
  const double dt = config_.vehicles.dt;
  StepResult res;
  ++state_.steps;
  bool uav_collision = false;
  bool uav_arrived_now = false;

  if (state_.uav_active) {
    const UavState next = step_uav(config_.uav_mode, state_.uav, cmd, dt, config_.vehicles);
    uav_collision = uav_collides(world_, config_, state_.uav, next);
    const double d_t = (next.p_w.head<2>() - target).norm();
    const double x_prev = state_.uav.p_w.x();
    const RewardResult rr = uav_reward(rp, world_.x_cross, world_.d_cross, uav_collision, d_t, next.p_w.x(), x_prev);
    res.reward_uav = rr.value;
    res.cases_uav = rr.cases;
    res.uav_stepped = true;
    res.uav_terminal = rr.terminal;
    uav_arrived_now = d_t < rp.theta1 && !uav_collision;
    if (config_.debug_log) {
      std::ostringstream line;
      line << "step=" << state_.steps << " agent=uav x_prev=" << fmt_exact(x_prev) << " x=" << fmt_exact(next.p_w.x())
           << " d=" << fmt_exact(d_t) << " collision=" << (uav_collision ? 1 : 0)
           << " cases=" << describe_cases(rp, rr, true, world_.x_cross, world_.d_cross, d_t, next.p_w.x())
           << " total=" << fmt_exact(rr.value);
      debug_.push_back(line.str());
    }
    state_.uav = next;
    state_.prev_cmd = cmd.a.cwiseMax(-1.0).cwiseMin(1.0);
  }

  bool ugv_collision = false;
  bool ugv_arrived = false;
  if (!hold) {
    const UgvState next = step_ugv(state_.ugv, action, dt, config_.vehicles);
    ugv_collision = ugv_collides(world_, config_, state_.ugv, next);
    const double d_t = (next.position - target).norm();
    const double d_uav = (next.position - state_.uav.p_w.head<2>()).norm();
    const double x_uav = state_.uav.p_w.x();
    const RewardResult rr =
        ugv_reward(rp, world_.x_cross, world_.d_cross, ugv_collision, d_t, d_uav, next.position.x(), x_uav);
    res.reward_ugv = rr.value;
    res.cases_ugv = rr.cases;
    res.ugv_stepped = true;
    res.ugv_terminal = rr.terminal;
    ugv_arrived = d_t < rp.theta1 && !ugv_collision;
    if (config_.debug_log) {
      std::ostringstream line;
      line << "step=" << state_.steps << " agent=ugv x=" << fmt_exact(next.position.x())
           << " x_uav=" << fmt_exact(x_uav) << " d=" << fmt_exact(d_t) << " d_uav=" << fmt_exact(d_uav)
           << " collision=" << (ugv_collision ? 1 : 0)
           << " cases=" << describe_cases(rp, rr, false, world_.x_cross, world_.d_cross, d_t, next.position.x())
           << " total=" << fmt_exact(rr.value);
      debug_.push_back(line.str());
    }
    state_.ugv = next;
    state_.prev_action = ugv_action_id;
  }

  if (uav_arrived_now) {
    state_.uav_arrived = true;
    state_.uav_active = false;  // the UAV hovers at the target from now on
  }
  res.uav_arrived = state_.uav_arrived;

  DoneReason reason = DoneReason::running;
  if (ugv_arrived) {
    reason = DoneReason::ugv_arrived;
  } else if (ugv_collision) {
    reason = DoneReason::ugv_collision;
  } else if (uav_collision) {
    reason = DoneReason::uav_collision;
  } else if (uav_arrived_now && hold) {
    reason = DoneReason::uav_arrived;
  } else if (state_.steps >= config_.step_limit) {
    reason = DoneReason::timeout;
    res.truncated = true;
  }
  res.done_reason = reason;
  res.done = reason != DoneReason::running;
  state_.done = res.done;
  state_.done_reason = reason;
  state_.return_uav += res.reward_uav;
  state_.return_ugv += res.reward_ugv;

  res.uav_obs = uav_obs();
  res.ugv_obs = ugv_obs();
  return res;
}

VectorEnv::VectorEnv(EnvConfig config, int num_instances, std::uint64_t master_seed, int workers)
    : master_seed_(master_seed), workers_(std::max(1, workers)) {
  if (num_instances < 1) throw BatchError("a vector env needs at least one instance");
  validate(config);
  instances_.reserve(static_cast<std::size_t>(num_instances));
  for (int i = 0; i < num_instances; ++i) instances_.emplace_back(config);
  reset_all();
}

std::uint64_t VectorEnv::episode_seed(std::uint64_t master, int instance, std::uint64_t episode) {
  return derive_seed(derive_seed(master, "instance", static_cast<std::uint64_t>(instance)), "episode", episode);
}

void VectorEnv::reset_all() {
  for (int i = 0; i < size(); ++i) {
    auto& inst = instances_[static_cast<std::size_t>(i)];
    InstanceState s = inst.state();
    s.episode_index = 0;
    inst.restore(s);
    inst.reset(episode_seed(master_seed_, i, 0));
  }
}

BatchStep VectorEnv::step(const std::vector<UavCommand>& cmds, const std::vector<int>& ugv_actions) {
  const std::size_t n = instances_.size();
  if (cmds.size() != n || ugv_actions.size() != n)
    throw BatchError("batched actions must have one entry per instance (" + std::to_string(n) + ")");
  BatchStep out;
  out.results.resize(n);
  out.terminal_uav_obs.resize(n);
  out.terminal_ugv_obs.resize(n);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      EnvInstance& inst = instances_[i];
      StepResult r = inst.step(cmds[i], ugv_actions[i]);
      if (r.done) {
        out.terminal_uav_obs[i] = r.uav_obs;
        out.terminal_ugv_obs[i] = r.ugv_obs;
        InstanceState s = inst.state();
        s.episode_index += 1;
        const std::uint64_t next = s.episode_index;
        inst.restore(s);
        inst.reset(episode_seed(master_seed_, static_cast<int>(i), next));
        r.uav_obs = inst.uav_obs();
        r.ugv_obs = inst.ugv_obs();
      }
      out.results[i] = std::move(r);
    }
  };

  // Collect finished-episode summaries before the instances are reset.
  std::vector<InstanceState> before(n);
  for (std::size_t i = 0; i < n; ++i) before[i] = instances_[i].state();

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(workers_), n);
  if (workers <= 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk;
      const std::size_t e = std::min(n, b + chunk);
      pool.emplace_back([&, w, b, e] {
        try {
          work(b, e);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const StepResult& r = out.results[i];
    if (!r.done) continue;
    BatchStep::Finished f;
    f.instance = static_cast<int>(i);
    f.return_uav = before[i].return_uav + r.reward_uav;
    f.return_ugv = before[i].return_ugv + r.reward_ugv;
    f.uav_arrived = r.uav_arrived;
    f.steps = before[i].steps + 1;
    f.reason = r.done_reason;
    out.finished.push_back(f);
  }
  return out;
}

std::vector<InstanceState> VectorEnv::save() const {
  std::vector<InstanceState> out;
  for (const auto& inst : instances_) out.push_back(inst.state());
  return out;
}

void VectorEnv::restore(const std::vector<InstanceState>& states) {
  if (states.size() != instances_.size()) throw BatchError("instance state count does not match the pool size");
  for (std::size_t i = 0; i < states.size(); ++i) instances_[i].restore(states[i]);
}

namespace {

void put_hex(std::ostream& out, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, " %a", v);
  out << buf;
}

double get_hex(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw CheckpointError("instance state line is truncated");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) throw CheckpointError("bad float '" + tok + "' in instance state");
  return v;
}

}  // namespace

std::string serialize(const InstanceState& s) {
  std::ostringstream out;
  out << s.episode_seed << ' ' << s.episode_index << ' ' << s.steps << ' ' << s.prev_action << ' '
      << (s.uav_active ? 1 : 0) << ' ' << (s.uav_arrived ? 1 : 0) << ' ' << (s.done ? 1 : 0) << ' '
      << to_string(s.done_reason);
  for (int i = 0; i < 3; ++i) put_hex(out, s.uav.p_w[i]);
  for (int i = 0; i < 3; ++i) put_hex(out, s.uav.v_w[i]);
  for (int i = 0; i < 9; ++i) put_hex(out, s.uav.R(i / 3, i % 3));
  put_hex(out, s.uav.yaw);
  put_hex(out, s.ugv.position.x());
  put_hex(out, s.ugv.position.y());
  put_hex(out, s.ugv.heading);
  put_hex(out, s.ugv.speed);
  for (int i = 0; i < 4; ++i) put_hex(out, s.prev_cmd[i]);
  put_hex(out, s.return_uav);
  put_hex(out, s.return_ugv);
  return out.str();
}

InstanceState deserialize_instance(const std::string& line) {
  std::istringstream in(line);
  InstanceState s;
  int active = 0;
  int arrived = 0;
  int done = 0;
  std::string reason;
  if (!(in >> s.episode_seed >> s.episode_index >> s.steps >> s.prev_action >> active >> arrived >> done >> reason))
    throw CheckpointError("malformed instance state line");
  s.uav_active = active != 0;
  s.uav_arrived = arrived != 0;
  s.done = done != 0;
  s.done_reason = parse_done_reason(reason);
  for (int i = 0; i < 3; ++i) s.uav.p_w[i] = get_hex(in);
  for (int i = 0; i < 3; ++i) s.uav.v_w[i] = get_hex(in);
  for (int i = 0; i < 9; ++i) s.uav.R(i / 3, i % 3) = get_hex(in);
  s.uav.yaw = get_hex(in);
  s.ugv.position.x() = get_hex(in);
  s.ugv.position.y() = get_hex(in);
  s.ugv.heading = get_hex(in);
  s.ugv.speed = get_hex(in);
  for (int i = 0; i < 4; ++i) s.prev_cmd[i] = get_hex(in);
  s.return_uav = get_hex(in);
  s.return_ugv = get_hex(in);
  return s;
}

}  // namespace minesearch
