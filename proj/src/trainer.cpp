#include "minesearch/trainer.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "minesearch/errors.hpp"
#include "minesearch/evalkit.hpp"
#include "minesearch/format.hpp"

namespace minesearch {

namespace fs = std::filesystem;

bool gate_update(GateState& g, const GateConfig& c, double window_mean) {
  if (window_mean >= c.threshold) {
    g.counter = std::min(g.counter + 1, c.required_consecutive);
  } else {
    g.counter = 0;
  }
  ++g.windows;
  g.passed = g.counter >= c.required_consecutive;
  return g.passed;
}

std::optional<GateWindow> gate_feed(GateState& g, const GateConfig& c, double reward) {
  g.accumulator += reward;
  if (++g.fill < c.window_steps) return std::nullopt;
  GateWindow w;
  w.index = g.windows;
  w.mean = g.accumulator / static_cast<double>(c.window_steps);
  w.passed = gate_update(g, c, w.mean);
  w.counter = g.counter;
  g.accumulator = 0;
  g.fill = 0;
  return w;
}

const char* to_string(Stage s) {
  switch (s) {
    case Stage::stage1: return "stage1";
    case Stage::stage2: return "stage2";
    case Stage::done: return "done";
  }
  return "?";
}

Stage parse_stage(const std::string& text) {
  if (text == "stage1") return Stage::stage1;
  if (text == "stage2") return Stage::stage2;
  if (text == "done") return Stage::done;
  throw CheckpointError("unknown stage '" + text + "'");
}

namespace {

constexpr const char* kMagic = "MSCKPT";
constexpr int kVersion = 1;
constexpr const char* kMetricsHeader =
    "run\tagent\tstage\tstep\tmean_return\tpolicy_loss\tvalue_loss\tentropy\tclip_fraction\tintrinsic_mean\t"
    "forward_loss\tinverse_loss\tepisodes";
constexpr const char* kProbeHeader = "run\tstage\tstep\tepisodes\tuav_success\tugv_success";
constexpr const char* kGateHeader = "window\tstep\tmean\tcounter\tpassed";

std::uint64_t agent_index(Agent a) { return a == Agent::uav ? 0 : 1; }

Learner make_learner(Agent a, const AgentConfig& ac, std::uint64_t seed) {
  Learner l;
  l.agent = a;
  l.net = make_policy(a, ac.hidden);
  Rng init = Rng::stream(seed, "init", agent_index(a));
  l.net.init(init, ac.log_std_init);
  l.opt = Adam<float>(l.net.params.size());
  if (ac.icm.strength > 0.0) {
    l.icm = std::make_unique<Icm<float>>(make_icm(a, ac.icm));
    Rng icm_init = Rng::stream(seed, "init-icm", agent_index(a));
    l.icm->init(icm_init);
    l.icm_opt = Adam<float>(l.icm->params.size());
  }
  l.sampler = Rng::stream(seed, "sample", agent_index(a));
  l.shuffle = Rng::stream(seed, "shuffle", agent_index(a));
  return l;
}

std::uint64_t env_seed(std::uint64_t seed, int stage) { return derive_seed(seed, "env", static_cast<std::uint64_t>(stage)); }

struct EpisodeTally {
  double sum = 0;
  long count = 0;
  double mean() const { return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN(); }
};

std::string metrics_row(const std::string& run, Agent a, Stage s, long long step, const EpisodeTally& t,
                        const UpdateStats& u, bool has_icm) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::ostringstream o;
  o << run << '\t' << to_string(a) << '\t' << to_string(s) << '\t' << step << '\t' << fmt_exact(t.mean()) << '\t'
    << fmt_exact(u.policy_loss) << '\t' << fmt_exact(u.value_loss) << '\t' << fmt_exact(u.entropy) << '\t'
    << fmt_exact(u.clip_fraction) << '\t' << fmt_exact(u.intrinsic_mean) << '\t'
    << fmt_exact(has_icm ? u.forward_loss : nan) << '\t' << fmt_exact(has_icm ? u.inverse_loss : nan) << '\t'
    << t.count;
  return o.str();
}

void append_line(const std::string& path, const std::string& line) {
  std::ofstream f(path, std::ios::app);
  if (!f) throw IoError("cannot append to " + path);
  f << line << '\n';
  if (!f) throw IoError("write failed: " + path);
}

// Keeps the header and every row whose `step` column is <= step.
void truncate_rows(const std::string& path, const std::string& header, std::size_t step_column, long long step) {
  std::ifstream in(path);
  std::string out = header + "\n";
  if (in) {
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first) {
        first = false;
        continue;
      }
      if (line.empty()) continue;
      std::size_t at = 0;
      for (std::size_t k = 0; k < step_column && at != std::string::npos; ++k) {
        at = line.find('\t', at);
        if (at != std::string::npos) ++at;
      }
      if (at == std::string::npos) continue;
      const auto end = line.find('\t', at);
      const long long s = parse_int(line.substr(at, end == std::string::npos ? std::string::npos : end - at));
      if (s <= step) out += line + "\n";
    }
  }
  write_text_file(path, out);
}

// --- checkpoint encoding ---

void put_floats(std::string& blob, const Eigen::VectorXf& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, &v[i], 4);
    for (int b = 0; b < 4; ++b) blob.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
  }
}

void get_floats(const std::string& blob, std::size_t& pos, Eigen::VectorXf& v, const std::string& name) {
  const std::size_t bytes = static_cast<std::size_t>(v.size()) * 4;
  if (pos + bytes > blob.size()) throw CheckpointError("checkpoint blob ends inside tensor " + name);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[pos + static_cast<std::size_t>(4 * i + b)]))
              << (8 * b);
    std::memcpy(&v[i], &bits, 4);
  }
  pos += bytes;
}

struct TensorRef {
  std::string name;
  Eigen::VectorXf* data;
};

std::vector<TensorRef> learner_tensors(Learner& l) {
  const std::string p = to_string(l.agent);
  std::vector<TensorRef> t{{p + ".params", &l.net.params.flat()}, {p + ".adam_m", &l.opt.m}, {p + ".adam_v", &l.opt.v}};
  if (l.icm) {
    t.push_back({p + ".icm.params", &l.icm->params.flat()});
    t.push_back({p + ".icm.adam_m", &l.icm_opt.m});
    t.push_back({p + ".icm.adam_v", &l.icm_opt.v});
  }
  return t;
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  if (s.size() != 16) throw CheckpointError("bad hex value '" + s + "'");
  std::uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else throw CheckpointError("bad hex value '" + s + "'");
  }
  return v;
}

struct Parsed {
  std::map<std::string, std::string> fields;
  std::vector<std::pair<std::string, std::size_t>> tensors;  // name, element count
  std::vector<std::string> instances;
  std::string config_text;
  std::string blob;
  std::string manifest;
};

Parsed parse_checkpoint(const std::string& bytes) {
  Parsed p;
  std::size_t pos = bytes.find('\n');
  if (pos == std::string::npos) throw CheckpointError("checkpoint: missing header");
  const std::string header = bytes.substr(0, pos);
  std::istringstream hs(header);
  std::string magic;
  int version = 0;
  hs >> magic >> version;
  if (magic != kMagic) throw CheckpointError("not a checkpoint file (header '" + header.substr(0, 32) + "')");
  if (version != kVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kVersion) + ")");
  const std::size_t nl = bytes.find('\n', pos + 1);
  if (nl == std::string::npos) throw CheckpointError("checkpoint: missing manifest size");
  long long mbytes = 0;
  try {
    mbytes = parse_int(bytes.substr(pos + 1, nl - pos - 1));
  } catch (const ConfigError&) {
    throw CheckpointError("checkpoint: bad manifest size");
  }
  if (mbytes < 0 || nl + 1 + static_cast<std::size_t>(mbytes) > bytes.size())
    throw CheckpointError("checkpoint: truncated manifest");
  p.manifest = bytes.substr(nl + 1, static_cast<std::size_t>(mbytes));
  p.blob = bytes.substr(nl + 1 + static_cast<std::size_t>(mbytes));

  std::istringstream in(p.manifest);
  std::string line;
  bool in_config = false;
  while (std::getline(in, line)) {
    if (in_config) {
      if (line == "config-end") {
        in_config = false;
        continue;
      }
      p.config_text += line + "\n";
      continue;
    }
    if (line == "config-begin") {
      in_config = true;
      continue;
    }
    const auto sp = line.find(' ');
    const std::string key = line.substr(0, sp);
    const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (key == "tensor") {
      std::istringstream ts(rest);
      std::string name;
      std::size_t count = 0;
      if (!(ts >> name >> count)) throw CheckpointError("checkpoint: bad tensor line '" + line + "'");
      p.tensors.emplace_back(name, count);
    } else if (key == "instance") {
      p.instances.push_back(rest);
    } else if (!key.empty()) {
      p.fields[key] = rest;
    }
  }
  if (in_config) throw CheckpointError("checkpoint: unterminated config section");
  return p;
}

const std::string& field(const Parsed& p, const std::string& key) {
  const auto it = p.fields.find(key);
  if (it == p.fields.end()) throw CheckpointError("checkpoint manifest lacks '" + key + "'");
  return it->second;
}

long long field_int(const Parsed& p, const std::string& key) {
  try {
    return parse_int(field(p, key));
  } catch (const ConfigError&) {
    throw CheckpointError("checkpoint manifest: bad integer for '" + key + "'");
  }
}

double field_double(const Parsed& p, const std::string& key) {
  try {
    return parse_double(field(p, key));
  } catch (const ConfigError&) {
    throw CheckpointError("checkpoint manifest: bad number for '" + key + "'");
  }
}

void verify_blob(const Parsed& p) {
  const std::uint64_t expected = parse_hex64(field(p, "blob_fnv"));
  if (static_cast<long long>(p.blob.size()) != field_int(p, "blob_bytes"))
    throw CheckpointError("checkpoint blob is " + std::to_string(p.blob.size()) + " bytes, manifest says " +
                          field(p, "blob_bytes"));
  const std::uint64_t got = fnv1a64(p.blob.data(), p.blob.size());
  if (got != expected)
    throw CheckpointError("checkpoint blob checksum mismatch (manifest " + hex64(expected) + ", data " + hex64(got) +
                          ")");
}

RunConfig config_of(const Parsed& p) {
  RunConfig c;
  try {
    c = parse_config(p.config_text);
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config is invalid: ") + e.what());
  }
  if (config_hash(c) != parse_hex64(field(p, "config_hash")))
    throw CheckpointError("checkpoint config text does not match its recorded hash");
  return c;
}

std::string read_binary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string config_diff(const std::string& a, const std::string& b) {
  std::istringstream ia(a), ib(b);
  std::string la, lb, out;
  int shown = 0;
  while (true) {
    const bool ga = static_cast<bool>(std::getline(ia, la));
    const bool gb = static_cast<bool>(std::getline(ib, lb));
    if (!ga && !gb) break;
    if (la != lb && shown < 8) {
      out += "\n  checkpoint: " + (ga ? la : "<none>") + "\n  expected:   " + (gb ? lb : "<none>");
      ++shown;
    }
    if (!ga) la.clear();
    if (!gb) lb.clear();
  }
  return out;
}

}  // namespace

Trainer::Trainer(RunConfig config, TrainOptions options) : Trainer(std::move(config), std::move(options), true) {}

Trainer::Trainer(RunConfig config, TrainOptions options, bool fresh)
    : config_(std::move(config)), options_(std::move(options)) {
  validate(config_);
  uav_ = make_learner(Agent::uav, config_.uav, config_.seed);
  ugv_ = make_learner(Agent::ugv, config_.ugv, config_.seed);
  out_ = config_.out;
  next_probe_ = config_.probe.interval;
  if (config_.simultaneous_baseline) {
    stage_ = Stage::stage2;
    env_ = std::make_unique<VectorEnv>(config_.env, config_.num_instances, env_seed(config_.seed, 2), config_.workers);
  } else {
    env_ = std::make_unique<VectorEnv>(config_.env, config_.num_instances, env_seed(config_.seed, 1), config_.workers);
  }
  if (fresh) open_outputs(false);
}

void Trainer::log(const std::string& line) const {
  if (options_.log) options_.log(line);
}

void Trainer::open_outputs(bool append) {
  fs::create_directories(out_);
  const std::string m = out_ + "/metrics.tsv", p = out_ + "/probe.tsv", g = out_ + "/gate.txt";
  write_text_file(out_ + "/config.cfg", print_config(config_));
  if (append) {
    truncate_rows(m, kMetricsHeader, 3, global_step_);
    truncate_rows(p, kProbeHeader, 2, global_step_);
    truncate_rows(g, kGateHeader, 1, global_step_);
  } else {
    write_text_file(m, std::string(kMetricsHeader) + "\n");
    write_text_file(p, std::string(kProbeHeader) + "\n");
    write_text_file(g, std::string(kGateHeader) + "\n");
  }
}

bool Trainer::stage1_exhausted() const { return stage_ == Stage::stage1 && global_step_ >= config_.gate.stage1_ceiling; }

bool Trainer::finished() const {
  if (stage_ == Stage::done) return true;
  if (config_.total_steps > 0 && global_step_ >= config_.total_steps) return true;
  return stage1_exhausted();
}

void Trainer::enter_stage2() {
  if (!gate_.passed && !config_.simultaneous_baseline)
    throw LifecycleError("stage 2 requires a passed gate outside the simultaneous baseline");
  stage_ = Stage::stage2;
  handoff_hash_ = param_hash(uav_.net.params);
  env_ = std::make_unique<VectorEnv>(config_.env, config_.num_instances, env_seed(config_.seed, 2), config_.workers);
  log("stage 2 begins at step " + std::to_string(global_step_));
}

void Trainer::run_probe() {
  InferenceOptions o;
  o.episodes = config_.probe.episodes;
  o.seed = derive_seed(config_.seed, "probe");
  o.batch = config_.probe.episodes;
  o.record_paths = false;
  ProbeRow row;
  row.stage = stage_;
  row.step = global_step_;
  row.episodes = o.episodes;
  if (stage_ == Stage::stage1) {
    const auto recs = run_inference(config_.env, uav_.net, nullptr, EvalMode::uav_only, o);
    long hits = 0;
    for (const auto& r : recs) hits += r.uav_arrived ? 1 : 0;
    row.uav_success = static_cast<double>(hits) / static_cast<double>(recs.size());
    row.ugv_success = std::numeric_limits<double>::quiet_NaN();
  } else {
    const auto recs = run_inference(config_.env, uav_.net, &ugv_.net, EvalMode::system, o);
    const Metrics m = compute_metrics(recs);
    row.uav_success = m.uav_arrival_rate;
    row.ugv_success = m.success_rate;
  }
  probes_.push_back(row);
  append_line(out_ + "/probe.tsv", config_.name + "\t" + to_string(row.stage) + "\t" + std::to_string(row.step) +
                                       "\t" + std::to_string(row.episodes) + "\t" + fmt_exact(row.uav_success) +
                                       "\t" + fmt_exact(row.ugv_success));
  log("probe step " + std::to_string(row.step) + ": uav " + format_percent(row.uav_success) +
      (stage_ == Stage::stage1 ? "" : ", ugv " + format_percent(row.ugv_success)));
}

bool Trainer::iterate() {
  if (finished()) return false;
  const int n = config_.num_instances;
  const int horizon = config_.uav.ppo.horizon;
  const bool joint = stage_ == Stage::stage2;
  const long long lr_step = stage2_step_;
  const double uav_scale = config_.uav.ppo.value_scale;
  const double ugv_scale = config_.ugv.ppo.value_scale;

  RolloutBuffer ub(n, horizon);
  RolloutBuffer gb(joint ? n : 1, horizon);
  EpisodeTally uav_returns, ugv_returns;
  std::vector<UavCommand> cmds(static_cast<std::size_t>(n));
  std::vector<int> actions(static_cast<std::size_t>(n), kUgvHold);
  std::vector<ObsVec> uo(static_cast<std::size_t>(n)), go(static_cast<std::size_t>(n));

  // Value of observations at which an episode was cut short, in reward units.
  auto bootstrap_values = [](const ActorCritic<float>& net, const std::vector<ObsVec>& obs, double scale) {
    std::vector<double> v;
    if (obs.empty()) return v;
    const Eigen::RowVectorXf out = net.forward(stack(obs)).value;
    for (Eigen::Index j = 0; j < out.size(); ++j) v.push_back(static_cast<double>(out[j]) * scale);
    return v;
  };

  for (int h = 0; h < horizon; ++h) {
    for (int i = 0; i < n; ++i) {
      uo[static_cast<std::size_t>(i)] = env_->instance(i).uav_obs();
      if (joint) go[static_cast<std::size_t>(i)] = env_->instance(i).ugv_obs();
    }
    const Eigen::MatrixXf um = stack(uo);
    const ActionBatch ua = sample_actions(uav_.net, um, uav_.sampler);
    Eigen::MatrixXf gm;
    ActionBatch ga;
    if (joint) {
      gm = stack(go);
      ga = sample_actions(ugv_.net, gm, ugv_.sampler);
    }
    for (int i = 0; i < n; ++i) {
      cmds[static_cast<std::size_t>(i)] = to_command(ua.executed.col(i));
      actions[static_cast<std::size_t>(i)] = joint ? to_ugv_action(ga.executed(0, i)) : kUgvHold;
    }
    const BatchStep bs = env_->step(cmds, actions);

    std::vector<int> cut_uav, cut_ugv;
    std::vector<ObsVec> cut_uav_obs, cut_ugv_obs;
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const StepResult& r = bs.results[k];
      if (r.uav_stepped) {
        Transition t;
        t.obs = um.col(i);
        t.next_obs = (r.done ? bs.terminal_uav_obs[k] : r.uav_obs).cast<float>();
        t.action = ua.action.col(i);
        t.executed = ua.executed.col(i);
        t.log_prob = ua.log_prob[i];
        t.value = static_cast<double>(ua.value[i]) * uav_scale;
        t.reward = r.reward_uav;
        t.terminal = r.uav_terminal;
        t.episode_end = r.uav_terminal || r.done;
        if (t.episode_end && !t.terminal) {
          cut_uav.push_back(i);
          cut_uav_obs.push_back(r.done ? bs.terminal_uav_obs[k] : r.uav_obs);
        }
        ub.add(i, std::move(t));
      }
      if (joint && r.ugv_stepped) {
        Transition t;
        t.obs = gm.col(i);
        t.next_obs = (r.done ? bs.terminal_ugv_obs[k] : r.ugv_obs).cast<float>();
        t.action = ga.action.col(i);
        t.executed = ga.executed.col(i);
        t.log_prob = ga.log_prob[i];
        t.value = static_cast<double>(ga.value[i]) * ugv_scale;
        t.reward = r.reward_ugv;
        t.terminal = r.ugv_terminal;
        t.episode_end = r.ugv_terminal || r.done;
        if (t.episode_end && !t.terminal) {
          cut_ugv.push_back(i);
          cut_ugv_obs.push_back(r.done ? bs.terminal_ugv_obs[k] : r.ugv_obs);
        }
        gb.add(i, std::move(t));
      }
      if (stage_ == Stage::stage1 && !gate_.passed) {
        if (const auto w = gate_feed(gate_, config_.gate, r.reward_uav)) {
          append_line(out_ + "/gate.txt", std::to_string(w->index) + "\t" +
                                              std::to_string(global_step_ + i + 1) + "\t" + fmt_exact(w->mean) +
                                              "\t" + std::to_string(w->counter) + "\t" + (w->passed ? "1" : "0"));
        }
      }
    }
    const auto vu = bootstrap_values(uav_.net, cut_uav_obs, uav_scale);
    for (std::size_t c = 0; c < cut_uav.size(); ++c) ub.sequence(cut_uav[c]).back().next_value = vu[c];
    if (joint) {
      const auto vg = bootstrap_values(ugv_.net, cut_ugv_obs, ugv_scale);
      for (std::size_t c = 0; c < cut_ugv.size(); ++c) gb.sequence(cut_ugv[c]).back().next_value = vg[c];
    }
    for (const auto& f : bs.finished) {
      uav_returns.sum += f.return_uav;
      ++uav_returns.count;
      if (joint) {
        ugv_returns.sum += f.return_ugv;
        ++ugv_returns.count;
      }
    }
    global_step_ += n;
    if (joint) stage2_step_ += n;
  }

  // Segment ends bootstrap from the value of the observation the next rollout starts from.
  std::vector<ObsVec> last_u, last_g;
  for (int i = 0; i < n; ++i) {
    last_u.push_back(env_->instance(i).uav_obs());
    if (joint) last_g.push_back(env_->instance(i).ugv_obs());
  }
  ub.finish(bootstrap_values(uav_.net, last_u, uav_scale));
  IcmLearner uav_icm{uav_.icm.get(), &uav_.icm_opt, config_.uav.icm};
  const UpdateStats us = ppo_update(uav_.net, uav_.opt, ub, config_.uav.ppo, config_.uav.schedule,
                                    static_cast<double>(lr_step), uav_.shuffle, uav_.icm ? &uav_icm : nullptr);
  ++uav_.updates;
  std::vector<std::string> rows{
      metrics_row(config_.name, Agent::uav, stage_, global_step_, uav_returns, us, uav_.icm != nullptr)};
  if (joint) {
    gb.finish(bootstrap_values(ugv_.net, last_g, ugv_scale));
    IcmLearner ugv_icm{ugv_.icm.get(), &ugv_.icm_opt, config_.ugv.icm};
    const UpdateStats gs = ppo_update(ugv_.net, ugv_.opt, gb, config_.ugv.ppo, config_.ugv.schedule,
                                      static_cast<double>(lr_step), ugv_.shuffle, ugv_.icm ? &ugv_icm : nullptr);
    ++ugv_.updates;
    rows.push_back(metrics_row(config_.name, Agent::ugv, stage_, global_step_, ugv_returns, gs, ugv_.icm != nullptr));
  }
  for (const auto& row : rows) {
    append_line(out_ + "/metrics.tsv", row);
    if (options_.verbose) std::cout << row << '\n';
  }
  ++total_updates_;
  ++session_updates_;

  if (config_.probe.interval > 0 && global_step_ >= next_probe_) {
    run_probe();
    while (next_probe_ <= global_step_) next_probe_ += config_.probe.interval;
  }

  if (stage_ == Stage::stage1 && gate_.passed) {
    log("gate passed at step " + std::to_string(global_step_));
    if (config_.stage1_only) {
      stage_ = Stage::done;
    } else {
      enter_stage2();
    }
  } else if (stage_ == Stage::stage1 && config_.stage1_only && stage1_exhausted()) {
    stage_ = Stage::done;
  } else if (stage_ == Stage::stage2 && stage2_step_ >= config_.max_step) {
    stage_ = Stage::done;
  }

  if (config_.checkpoint_every > 0 && total_updates_ % config_.checkpoint_every == 0) write_checkpoints(false);
  return !finished();
}

void Trainer::write_checkpoints(bool final) {
  const std::string bytes = checkpoint_bytes();
  if (final) {
    write_text_file(out_ + "/final.ckpt", bytes);
    return;
  }
  write_text_file(out_ + "/checkpoint.ckpt", bytes);
  if (config_.keep_checkpoints) write_text_file(out_ + "/checkpoint-" + std::to_string(total_updates_) + ".ckpt", bytes);
}

TrainResult Trainer::run() {
  while (!finished()) {
    if (options_.max_updates >= 0 && session_updates_ >= options_.max_updates) {
      write_checkpoints(false);
      return {RunStatus::paused, stage_, global_step_, stage2_step_, gate_.counter,
              "paused after " + std::to_string(session_updates_) + " updates"};
    }
    iterate();
  }
  write_checkpoints(false);
  write_checkpoints(true);
  TrainResult r{RunStatus::completed, stage_, global_step_, stage2_step_, gate_.counter, "training complete"};
  if (stage1_exhausted() && !config_.stage1_only) {
    r.status = RunStatus::gate_timeout;
    r.message = "gate did not pass within " + std::to_string(config_.gate.stage1_ceiling) +
                " stage-1 steps (counter " + std::to_string(gate_.counter) + " of " +
                std::to_string(config_.gate.required_consecutive) + ", " + std::to_string(gate_.windows) +
                " windows); see " + out_ + "/gate.txt";
  } else if (stage_ != Stage::done) {
    r.message = "step budget of " + std::to_string(config_.total_steps) + " reached in " + to_string(stage_);
  }
  return r;
}

std::string Trainer::checkpoint_bytes() const {
  auto& self = const_cast<Trainer&>(*this);
  std::string blob;
  std::ostringstream m;
  m << "stage " << to_string(stage_) << '\n'
    << "global_step " << global_step_ << '\n'
    << "stage2_step " << stage2_step_ << '\n'
    << "next_probe " << next_probe_ << '\n'
    << "updates " << total_updates_ << '\n'
    << "handoff_hash " << hex64(handoff_hash_) << '\n'
    << "gate_counter " << gate_.counter << '\n'
    << "gate_accumulator " << fmt_exact(gate_.accumulator) << '\n'
    << "gate_fill " << gate_.fill << '\n'
    << "gate_windows " << gate_.windows << '\n'
    << "gate_passed " << (gate_.passed ? 1 : 0) << '\n'
    << "env_seed " << hex64(env_->master_seed()) << '\n';
  for (Learner* l : {&self.uav_, &self.ugv_}) {
    const std::string p = to_string(l->agent);
    m << p << ".sampler " << hex64(l->sampler.state().key) << ' ' << hex64(l->sampler.state().counter) << '\n'
      << p << ".shuffle " << hex64(l->shuffle.state().key) << ' ' << hex64(l->shuffle.state().counter) << '\n'
      << p << ".updates " << l->updates << '\n'
      << p << ".adam_t " << l->opt.t << '\n'
      << p << ".icm_adam_t " << (l->icm ? l->icm_opt.t : 0) << '\n';
    for (const auto& t : learner_tensors(*l)) {
      m << "tensor " << t.name << ' ' << t.data->size() << '\n';
      put_floats(blob, *t.data);
    }
  }
  for (const auto& s : env_->save()) m << "instance " << serialize(s) << '\n';
  const std::string cfg = print_config(config_);
  m << "config_hash " << hex64(config_hash(config_)) << '\n'
    << "blob_bytes " << blob.size() << '\n'
    << "blob_fnv " << hex64(fnv1a64(blob.data(), blob.size())) << '\n'
    << "config-begin\n"
    << cfg << "config-end\n";
  const std::string manifest = m.str();
  return std::string(kMagic) + " " + std::to_string(kVersion) + "\n" + std::to_string(manifest.size()) + "\n" +
         manifest + blob;
}

void Trainer::save_checkpoint(const std::string& path) const { write_text_file(path, checkpoint_bytes()); }

Trainer Trainer::resume(const std::string& checkpoint_path, TrainOptions options, const std::string& out_dir) {
  const Parsed p = parse_checkpoint(read_binary(checkpoint_path));
  verify_blob(p);
  RunConfig c = config_of(p);
  if (!out_dir.empty()) c.out = out_dir;
  Trainer t(c, std::move(options), false);
  t.config_.out = c.out;
  t.stage_ = parse_stage(field(p, "stage"));
  t.global_step_ = field_int(p, "global_step");
  t.stage2_step_ = field_int(p, "stage2_step");
  t.next_probe_ = field_int(p, "next_probe");
  t.total_updates_ = field_int(p, "updates");
  t.handoff_hash_ = parse_hex64(field(p, "handoff_hash"));
  t.gate_.counter = static_cast<int>(field_int(p, "gate_counter"));
  t.gate_.accumulator = field_double(p, "gate_accumulator");
  t.gate_.fill = static_cast<int>(field_int(p, "gate_fill"));
  t.gate_.windows = field_int(p, "gate_windows");
  t.gate_.passed = field_int(p, "gate_passed") != 0;
  if (t.stage_ != Stage::stage1)
    t.env_ = std::make_unique<VectorEnv>(t.config_.env, t.config_.num_instances, env_seed(t.config_.seed, 2),
                                         t.config_.workers);
  if (parse_hex64(field(p, "env_seed")) != t.env_->master_seed())
    throw CheckpointError("checkpoint environment seed does not match its stage");

  auto rng_field = [&](const std::string& key) {
    std::istringstream s(field(p, key));
    std::string a, b;
    s >> a >> b;
    return RngState{parse_hex64(a), parse_hex64(b)};
  };
  std::size_t pos = 0, tensor = 0;
  for (Learner* l : {&t.uav_, &t.ugv_}) {
    const std::string name = to_string(l->agent);
    l->sampler.restore(rng_field(name + ".sampler"));
    l->shuffle.restore(rng_field(name + ".shuffle"));
    l->updates = field_int(p, name + ".updates");
    l->opt.t = field_int(p, name + ".adam_t");
    if (l->icm) l->icm_opt.t = field_int(p, name + ".icm_adam_t");
    for (const auto& ref : learner_tensors(*l)) {
      if (tensor >= p.tensors.size() || p.tensors[tensor].first != ref.name ||
          p.tensors[tensor].second != static_cast<std::size_t>(ref.data->size()))
        throw CheckpointError("checkpoint tensor layout differs at '" + ref.name + "'");
      get_floats(p.blob, pos, *ref.data, ref.name);
      ++tensor;
    }
  }
  if (tensor != p.tensors.size() || pos != p.blob.size())
    throw CheckpointError("checkpoint holds tensors this configuration does not use");

  std::vector<InstanceState> states;
  for (const auto& line : p.instances) {
    try {
      states.push_back(deserialize_instance(line));
    } catch (const Error& e) {
      throw CheckpointError(std::string("checkpoint instance state: ") + e.what());
    }
  }
  try {
    t.env_->restore(states);
  } catch (const BatchError& e) {
    throw CheckpointError(std::string("checkpoint instance count: ") + e.what());
  }
  t.open_outputs(true);
  // Probe rows already written stay in the file; the in-memory list starts empty.
  return t;
}

CheckpointInfo read_checkpoint_info(const std::string& path) {
  const Parsed p = parse_checkpoint(read_binary(path));
  verify_blob(p);
  CheckpointInfo info;
  info.manifest = p.manifest;
  info.config = config_of(p);
  info.stage = parse_stage(field(p, "stage"));
  info.global_step = field_int(p, "global_step");
  return info;
}

void check_checkpoint_config(const std::string& path, const RunConfig& expected) {
  const CheckpointInfo info = read_checkpoint_info(path);
  if (config_hash(info.config) != config_hash(expected))
    throw CheckpointError("checkpoint " + path + " was written under a different configuration:" +
                          config_diff(print_config(info.config), print_config(expected)));
}

void load_policies(const std::string& path, ActorCritic<float>& uav, ActorCritic<float>& ugv, bool& has_ugv) {
  const Parsed p = parse_checkpoint(read_binary(path));
  verify_blob(p);
  const RunConfig c = config_of(p);
  Learner lu = make_learner(Agent::uav, c.uav, c.seed);
  Learner lg = make_learner(Agent::ugv, c.ugv, c.seed);
  std::size_t pos = 0, tensor = 0;
  for (Learner* l : {&lu, &lg}) {
    for (const auto& ref : learner_tensors(*l)) {
      if (tensor >= p.tensors.size() || p.tensors[tensor].first != ref.name ||
          p.tensors[tensor].second != static_cast<std::size_t>(ref.data->size()))
        throw CheckpointError("checkpoint tensor layout differs at '" + ref.name + "'");
      get_floats(p.blob, pos, *ref.data, ref.name);
      ++tensor;
    }
  }
  uav = std::move(lu.net);
  ugv = std::move(lg.net);
  has_ugv = field_int(p, "ugv.updates") > 0;
}

}  // namespace minesearch
