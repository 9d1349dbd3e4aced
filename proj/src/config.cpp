#include "minesearch/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <map>
#include <sstream>

#include "minesearch/errors.hpp"
#include "minesearch/evalkit.hpp"
#include "minesearch/format.hpp"

namespace minesearch {

RunConfig default_config() {
  RunConfig c;
  c.uav.ppo.epsilon = 0.2;
  c.uav.schedule.initial = 3e-4;
  c.uav.icm.strength = 0.02;
  c.ugv.ppo.epsilon = 0.3;
  c.ugv.schedule.initial = 2e-4;
  c.ugv.icm.strength = 0.05;
  for (AgentConfig* a : {&c.uav, &c.ugv}) {
    a->ppo.entropy_coef = 0.03;
    a->ppo.lambda = 0.95;
    a->ppo.gamma = 0.99;
    a->ppo.extrinsic_strength = 1.0;
    a->icm.gamma = 0.99;
    a->icm.learning_rate = 3e-4;
    a->schedule.mode = LrSchedule::Mode::linear;
    a->schedule.total_steps = static_cast<double>(c.max_step);
  }
  return c;
}

void validate(const RunConfig& c) {
  validate(c.env);
  validate(c.uav.ppo, "uav");
  validate(c.ugv.ppo, "ugv");
  validate(c.uav.icm, "uav");
  validate(c.ugv.icm, "ugv");
  for (const auto* a : {&c.uav, &c.ugv}) {
    const std::string n = a == &c.uav ? "uav" : "ugv";
    if (!(a->schedule.initial >= 0.0)) throw ConfigError(n + ".learning_rate must be >= 0");
    if (a->hidden < 1) throw ConfigError(n + ".hidden_units must be >= 1");
    if (!std::isfinite(a->log_std_init)) throw ConfigError(n + ".log_std_init must be finite");
  }
  if (c.gate.window_steps < 1) throw ConfigError("gate.window_steps must be >= 1");
  if (c.gate.required_consecutive < 1) throw ConfigError("gate.required_consecutive must be >= 1");
  if (c.gate.stage1_ceiling < 1) throw ConfigError("gate.stage1_ceiling must be >= 1");
  if (!std::isfinite(c.gate.threshold)) throw ConfigError("gate.threshold must be finite");
  if (c.probe.interval < 0) throw ConfigError("probe.interval must be >= 0");
  if (c.probe.episodes < 1) throw ConfigError("probe.episodes must be >= 1");
  if (c.num_instances < 1) throw ConfigError("run.num_instances must be >= 1");
  if (c.workers < 1) throw ConfigError("run.workers must be >= 1");
  if (c.max_step < 0) throw ConfigError("run.max_step must be >= 0");
  if (c.total_steps < 0) throw ConfigError("run.total_steps must be >= 0");
  if (c.checkpoint_every < 0) throw ConfigError("run.checkpoint_every must be >= 0");
  if (c.simultaneous_baseline && c.stage1_only)
    throw ConfigError("run.stage1_only cannot be combined with run.simultaneous_baseline");
  if (c.uav.ppo.horizon != c.ugv.ppo.horizon)
    throw ConfigError("ugv.time_horizon must equal uav.time_horizon (both agents share one rollout)");
  if (c.name.empty() || c.name.find_first_of(" \t\n#") != std::string::npos)
    throw ConfigError("run.name must be a non-empty word");
}

namespace {

struct Field {
  std::string key;
  std::function<std::string(RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("expected true or false, got '" + s + "'");
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty())
    throw ConfigError("expected a nonnegative integer, got '" + s + "'");
  return v;
}

int to_int(long long v) {
  if (v < -2147483647LL || v > 2147483647LL) throw ConfigError("integer out of range");
  return static_cast<int>(v);
}

using DoubleRef = std::function<double&(RunConfig&)>;
using IntRef = std::function<int&(RunConfig&)>;
using LongRef = std::function<long long&(RunConfig&)>;
using BoolRef = std::function<bool&(RunConfig&)>;

Field dbl(std::string key, DoubleRef ref) {
  return {std::move(key), [ref](RunConfig& c) { return fmt_exact(ref(c)); },
          [ref](RunConfig& c, const std::string& v) { ref(c) = parse_double(v); }};
}
Field integer(std::string key, IntRef ref) {
  return {std::move(key), [ref](RunConfig& c) { return std::to_string(ref(c)); },
          [ref](RunConfig& c, const std::string& v) { ref(c) = to_int(parse_int(v)); }};
}
Field longint(std::string key, LongRef ref) {
  return {std::move(key), [ref](RunConfig& c) { return std::to_string(ref(c)); },
          [ref](RunConfig& c, const std::string& v) { ref(c) = parse_int(v); }};
}
Field boolean(std::string key, BoolRef ref) {
  return {std::move(key), [ref](RunConfig& c) { return fmt_bool(ref(c)); },
          [ref](RunConfig& c, const std::string& v) { ref(c) = parse_bool(v); }};
}

void agent_fields(std::vector<Field>& f, const std::string& p, AgentConfig RunConfig::*member) {
  auto a = [member](RunConfig& c) -> AgentConfig& { return c.*member; };
  f.push_back(dbl(p + ".learning_rate", [a](RunConfig& c) -> double& { return a(c).schedule.initial; }));
  f.push_back({p + ".learning_rate_schedule", [a](RunConfig& c) { return std::string(to_string(a(c).schedule.mode)); },
               [a](RunConfig& c, const std::string& v) { a(c).schedule.mode = parse_schedule_mode(v); }});
  f.push_back(dbl(p + ".beta", [a](RunConfig& c) -> double& { return a(c).ppo.entropy_coef; }));
  f.push_back(dbl(p + ".epsilon", [a](RunConfig& c) -> double& { return a(c).ppo.epsilon; }));
  f.push_back(dbl(p + ".lambd", [a](RunConfig& c) -> double& { return a(c).ppo.lambda; }));
  f.push_back(dbl(p + ".extrinsic_gamma", [a](RunConfig& c) -> double& { return a(c).ppo.gamma; }));
  f.push_back(dbl(p + ".extrinsic_strength", [a](RunConfig& c) -> double& { return a(c).ppo.extrinsic_strength; }));
  f.push_back(dbl(p + ".curiosity_gamma", [a](RunConfig& c) -> double& { return a(c).icm.gamma; }));
  f.push_back(dbl(p + ".curiosity_strength", [a](RunConfig& c) -> double& { return a(c).icm.strength; }));
  f.push_back(dbl(p + ".curiosity_learning_rate", [a](RunConfig& c) -> double& { return a(c).icm.learning_rate; }));
  f.push_back(dbl(p + ".curiosity_forward_weight", [a](RunConfig& c) -> double& { return a(c).icm.forward_weight; }));
  f.push_back(integer(p + ".curiosity_feature_dim", [a](RunConfig& c) -> int& { return a(c).icm.feature_dim; }));
  f.push_back(integer(p + ".curiosity_hidden_units", [a](RunConfig& c) -> int& { return a(c).icm.hidden; }));
  f.push_back(integer(p + ".hidden_units", [a](RunConfig& c) -> int& { return a(c).hidden; }));
  f.push_back(dbl(p + ".log_std_init", [a](RunConfig& c) -> double& { return a(c).log_std_init; }));
  f.push_back(integer(p + ".num_epoch", [a](RunConfig& c) -> int& { return a(c).ppo.epochs; }));
  f.push_back(integer(p + ".batch_size", [a](RunConfig& c) -> int& { return a(c).ppo.minibatch_size; }));
  f.push_back(integer(p + ".time_horizon", [a](RunConfig& c) -> int& { return a(c).ppo.horizon; }));
  f.push_back(dbl(p + ".value_coef", [a](RunConfig& c) -> double& { return a(c).ppo.value_coef; }));
  f.push_back(dbl(p + ".value_scale", [a](RunConfig& c) -> double& { return a(c).ppo.value_scale; }));
  f.push_back(boolean(p + ".normalize_advantages", [a](RunConfig& c) -> bool& { return a(c).ppo.normalize_advantages; }));
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"run.name", [](RunConfig& c) { return c.name; }, [](RunConfig& c, const std::string& v) { c.name = v; }});
    f.push_back({"run.seed", [](RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, const std::string& v) { c.seed = parse_u64(v); }});
    f.push_back({"run.out", [](RunConfig& c) { return c.out; }, [](RunConfig& c, const std::string& v) { c.out = v; }});
    f.push_back(integer("run.num_instances", [](RunConfig& c) -> int& { return c.num_instances; }));
    f.push_back(integer("run.workers", [](RunConfig& c) -> int& { return c.workers; }));
    f.push_back(longint("run.max_step", [](RunConfig& c) -> long long& { return c.max_step; }));
    f.push_back(longint("run.total_steps", [](RunConfig& c) -> long long& { return c.total_steps; }));
    f.push_back(integer("run.checkpoint_every", [](RunConfig& c) -> int& { return c.checkpoint_every; }));
    f.push_back(boolean("run.keep_checkpoints", [](RunConfig& c) -> bool& { return c.keep_checkpoints; }));
    f.push_back(boolean("run.simultaneous_baseline", [](RunConfig& c) -> bool& { return c.simultaneous_baseline; }));
    f.push_back(boolean("run.stage1_only", [](RunConfig& c) -> bool& { return c.stage1_only; }));

    // env.variant is applied before every other key; see parse_config.
    f.push_back({"env.variant", [](RunConfig& c) { return std::string(to_string(c.env.variant.name)); },
                 [](RunConfig& c, const std::string& v) {
                   c.env.variant = parse_variant_name(v) == VariantName::complex ? EnvVariant::complex()
                                                                                  : EnvVariant::original();
                 }});
    f.push_back(dbl("env.corridor_width", [](RunConfig& c) -> double& { return c.env.variant.corridor_width; }));
    f.push_back(dbl("env.fork_half_angle", [](RunConfig& c) -> double& { return c.env.variant.fork_half_angle; }));
    f.push_back(integer("env.obstacle_layout_id", [](RunConfig& c) -> int& { return c.env.variant.obstacle_layout_id; }));
    f.push_back(dbl("env.target_branch_angle", [](RunConfig& c) -> double& { return c.env.variant.target_branch_angle; }));
    f.push_back({"env.uav_mode", [](RunConfig& c) { return std::string(to_string(c.env.uav_mode)); },
                 [](RunConfig& c, const std::string& v) { c.env.uav_mode = parse_uav_mode(v); }});
    f.push_back(integer("env.step_limit", [](RunConfig& c) -> int& { return c.env.step_limit; }));
    f.push_back(dbl("env.lidar_range", [](RunConfig& c) -> double& { return c.env.lidar_range; }));
    f.push_back(dbl("env.scan_pitch_deg", [](RunConfig& c) -> double& { return c.env.scan_pitch_deg; }));
    f.push_back(dbl("env.uav_start_x", [](RunConfig& c) -> double& { return c.env.uav_start.x(); }));
    f.push_back(dbl("env.uav_start_y", [](RunConfig& c) -> double& { return c.env.uav_start.y(); }));
    f.push_back(dbl("env.uav_start_z", [](RunConfig& c) -> double& { return c.env.uav_start.z(); }));
    f.push_back(dbl("env.ugv_start_x", [](RunConfig& c) -> double& { return c.env.ugv_start.x(); }));
    f.push_back(dbl("env.ugv_start_y", [](RunConfig& c) -> double& { return c.env.ugv_start.y(); }));
    f.push_back(dbl("env.start_lateral_jitter", [](RunConfig& c) -> double& { return c.env.start_lateral_jitter; }));
    f.push_back(dbl("env.start_yaw_jitter", [](RunConfig& c) -> double& { return c.env.start_yaw_jitter; }));
    f.push_back(boolean("env.debug_log", [](RunConfig& c) -> bool& { return c.env.debug_log; }));

    auto L = [](RunConfig& c) -> WorldLayout& { return c.env.layout; };
    f.push_back(dbl("layout.corridor_length", [L](RunConfig& c) -> double& { return L(c).corridor_length; }));
    f.push_back(dbl("layout.branch_length", [L](RunConfig& c) -> double& { return L(c).branch_length; }));
    f.push_back(dbl("layout.first_leg_length", [L](RunConfig& c) -> double& { return L(c).first_leg_length; }));
    f.push_back(dbl("layout.target_distance", [L](RunConfig& c) -> double& { return L(c).target_distance; }));
    f.push_back(dbl("layout.target_radius", [L](RunConfig& c) -> double& { return L(c).target_radius; }));
    f.push_back(boolean("layout.fork", [L](RunConfig& c) -> bool& { return L(c).fork; }));
    f.push_back(integer("layout.obstacle_count", [L](RunConfig& c) -> int& { return L(c).obstacle_count; }));
    f.push_back(dbl("layout.obstacle_first_x", [L](RunConfig& c) -> double& { return L(c).obstacle_first_x; }));
    f.push_back(dbl("layout.obstacle_spacing", [L](RunConfig& c) -> double& { return L(c).obstacle_spacing; }));
    f.push_back(dbl("layout.obstacle_lateral_offset",
                    [L](RunConfig& c) -> double& { return L(c).obstacle_lateral_offset; }));
    f.push_back(dbl("layout.obstacle_length", [L](RunConfig& c) -> double& { return L(c).obstacle_length; }));
    f.push_back(dbl("layout.obstacle_width", [L](RunConfig& c) -> double& { return L(c).obstacle_width; }));
    f.push_back(dbl("layout.obstacle_jitter", [L](RunConfig& c) -> double& { return L(c).obstacle_jitter; }));
    f.push_back(dbl("layout.wall_height", [L](RunConfig& c) -> double& { return L(c).wall_height; }));
    f.push_back(dbl("layout.obstacle_height", [L](RunConfig& c) -> double& { return L(c).obstacle_height; }));

    auto V = [](RunConfig& c) -> VehicleParams& { return c.env.vehicles; };
    f.push_back(dbl("vehicles.mass", [V](RunConfig& c) -> double& { return V(c).mass; }));
    f.push_back(dbl("vehicles.gravity", [V](RunConfig& c) -> double& { return V(c).gravity; }));
    f.push_back(dbl("vehicles.dt", [V](RunConfig& c) -> double& { return V(c).dt; }));
    f.push_back(dbl("vehicles.rate_xy_max", [V](RunConfig& c) -> double& { return V(c).rate_xy_max; }));
    f.push_back(dbl("vehicles.rate_z_max", [V](RunConfig& c) -> double& { return V(c).rate_z_max; }));
    f.push_back(dbl("vehicles.v_max", [V](RunConfig& c) -> double& { return V(c).v_max; }));
    f.push_back(dbl("vehicles.yaw_rate_max", [V](RunConfig& c) -> double& { return V(c).yaw_rate_max; }));
    f.push_back(dbl("vehicles.vz_max", [V](RunConfig& c) -> double& { return V(c).vz_max; }));
    f.push_back(dbl("vehicles.h_min", [V](RunConfig& c) -> double& { return V(c).h_min; }));
    f.push_back(dbl("vehicles.h_max", [V](RunConfig& c) -> double& { return V(c).h_max; }));
    f.push_back(dbl("vehicles.ugv_turn_rate", [V](RunConfig& c) -> double& { return V(c).ugv_turn_rate; }));
    f.push_back(dbl("vehicles.uav_radius", [V](RunConfig& c) -> double& { return V(c).uav_radius; }));
    f.push_back(dbl("vehicles.ugv_radius", [V](RunConfig& c) -> double& { return V(c).ugv_radius; }));
    f.push_back(dbl("vehicles.ugv_sensor_height", [V](RunConfig& c) -> double& { return V(c).ugv_sensor_height; }));

    auto R = [](RunConfig& c) -> RewardParams& { return c.env.rewards; };
    f.push_back(dbl("rewards.r_arrive_uav", [R](RunConfig& c) -> double& { return R(c).r_arrive_uav; }));
    f.push_back(dbl("rewards.r_collision_uav", [R](RunConfig& c) -> double& { return R(c).r_collision_uav; }));
    f.push_back(dbl("rewards.r_forward", [R](RunConfig& c) -> double& { return R(c).r_forward; }));
    f.push_back(dbl("rewards.alpha", [R](RunConfig& c) -> double& { return R(c).alpha; }));
    f.push_back(dbl("rewards.r_collision_ugv", [R](RunConfig& c) -> double& { return R(c).r_collision_ugv; }));
    f.push_back(dbl("rewards.r_distance", [R](RunConfig& c) -> double& { return R(c).r_distance; }));
    f.push_back(dbl("rewards.r_follow", [R](RunConfig& c) -> double& { return R(c).r_follow; }));
    f.push_back(dbl("rewards.c_r1", [R](RunConfig& c) -> double& { return R(c).c_r1; }));
    f.push_back(dbl("rewards.c_r2", [R](RunConfig& c) -> double& { return R(c).c_r2; }));
    f.push_back(dbl("rewards.r_arrive_ugv", [R](RunConfig& c) -> double& { return R(c).r_arrive_ugv; }));
    f.push_back(dbl("rewards.r_time", [R](RunConfig& c) -> double& { return R(c).r_time; }));
    f.push_back(dbl("rewards.theta1", [R](RunConfig& c) -> double& { return R(c).theta1; }));
    f.push_back(dbl("rewards.theta2", [R](RunConfig& c) -> double& { return R(c).theta2; }));

    agent_fields(f, "uav", &RunConfig::uav);
    agent_fields(f, "ugv", &RunConfig::ugv);

    f.push_back(integer("gate.window_steps", [](RunConfig& c) -> int& { return c.gate.window_steps; }));
    f.push_back(dbl("gate.threshold", [](RunConfig& c) -> double& { return c.gate.threshold; }));
    f.push_back(integer("gate.required_consecutive", [](RunConfig& c) -> int& { return c.gate.required_consecutive; }));
    f.push_back(longint("gate.stage1_ceiling", [](RunConfig& c) -> long long& { return c.gate.stage1_ceiling; }));
    f.push_back(longint("probe.interval", [](RunConfig& c) -> long long& { return c.probe.interval; }));
    f.push_back(integer("probe.episodes", [](RunConfig& c) -> int& { return c.probe.episodes; }));
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

std::string suggestion(const std::string& key) {
  std::string best;
  std::size_t best_d = std::string::npos;
  for (const auto& f : fields()) {
    std::size_t d = edit_distance(key, f.key);
    // Also compare within the same section, so "uav.lamda" finds "uav.lambd".
    const auto dot = key.find('.');
    const auto fdot = f.key.find('.');
    if (dot == std::string::npos && fdot != std::string::npos)
      d = std::min(d, edit_distance(key, f.key.substr(fdot + 1)) + 1);
    if (d < best_d) {
      best_d = d;
      best = f.key;
    }
  }
  return best;
}

void sync_schedules(RunConfig& c) {
  c.uav.schedule.total_steps = static_cast<double>(c.max_step);
  c.ugv.schedule.total_steps = static_cast<double>(c.max_step);
}

}  // namespace

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

RunConfig parse_config(const std::string& text) {
  struct Entry {
    std::string key;
    std::string value;
    int line;
  };
  std::vector<Entry> entries;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string at = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(at + "malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(at + "expected 'key = value', got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(at + "missing key");
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    if (!find_field(key)) {
      throw ConfigError(at + "unknown key '" + key + "'; did you mean '" + suggestion(key) + "'?");
    }
    for (const auto& e : entries)
      if (e.key == key) throw ConfigError(at + "duplicate key '" + key + "' (first set on line " + std::to_string(e.line) + ")");
    entries.push_back({key, value, lineno});
  }

  RunConfig c = default_config();
  // The variant replaces its whole group of defaults, so it goes first.
  std::stable_partition(entries.begin(), entries.end(), [](const Entry& e) { return e.key == "env.variant"; });
  for (const auto& e : entries) {
    try {
      find_field(e.key)->set(c, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + e.key + ": " + err.what());
    }
  }
  sync_schedules(c);
  try {
    validate(c);
  } catch (const ConfigError& err) {
    const std::string msg = err.what();
    for (const auto& e : entries) {
      const std::string leaf = e.key.substr(e.key.find('.') + 1);
      if (msg.rfind(e.key, 0) == 0 || msg.rfind(leaf, 0) == 0)
        throw ConfigError("line " + std::to_string(e.line) + ": " + msg);
    }
    throw;
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_config(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string print_config(const RunConfig& config) {
  RunConfig c = config;
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    const std::string s = f.key.substr(0, f.key.find('.'));
    if (s != section) {
      if (!section.empty()) out << '\n';
      out << "# " << s << '\n';
      section = s;
    }
    out << f.key << " = " << f.get(c) << '\n';
  }
  return out.str();
}

std::uint64_t config_hash(const RunConfig& c) { return fnv1a64(print_config(c)); }

void apply_env_overrides(RunConfig& c, const std::function<const char*(const std::string&)>& lookup) {
  for (const auto& f : fields()) {
    std::string name = "MINESEARCH_";
    for (char ch : f.key) name += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    const char* v = lookup(name);
    if (!v) continue;
    try {
      f.set(c, trim(v));
    } catch (const ConfigError& e) {
      throw ConfigError(name + ": " + f.key + ": " + e.what());
    }
  }
  sync_schedules(c);
  validate(c);
}

void apply_env_overrides(RunConfig& c) {
  apply_env_overrides(c, [](const std::string& n) -> const char* { return std::getenv(n.c_str()); });
}

}  // namespace minesearch
