#include "minesearch/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "minesearch/agents.hpp"
#include "minesearch/errors.hpp"
#include "minesearch/format.hpp"

namespace minesearch {

const char* to_string(EvalMode m) { return m == EvalMode::system ? "system" : "uav_only"; }

std::uint64_t eval_episode_seed(std::uint64_t seed, int episode) {
  return derive_seed(seed, "eval", static_cast<std::uint64_t>(episode));
}

namespace {

bool is_success(DoneReason r) { return r == DoneReason::ugv_arrived || r == DoneReason::uav_arrived; }

PathPoint point(double t, double x, double y, double z, double reward, double cum) {
  return {static_cast<float>(t), static_cast<float>(x), static_cast<float>(y), static_cast<float>(z),
          static_cast<float>(reward), static_cast<float>(cum)};
}

}  // namespace

namespace {

// Matrix products of different widths may round differently, so each episode
// is evaluated as its own column to keep results independent of batching.
ActionBatch act_per_column(const ActorCritic<float>& net, const Eigen::MatrixXf& obs, std::vector<Rng*>& rngs,
                           bool stochastic) {
  const Eigen::Index n = obs.cols();
  ActionBatch out;
  for (Eigen::Index j = 0; j < n; ++j) {
    std::vector<Rng*> one{rngs[static_cast<std::size_t>(j)]};
    const ActionBatch b = stochastic ? sample_actions(net, obs.col(j), one) : greedy_actions(net, obs.col(j));
    if (j == 0) {
      out.action.resize(b.action.rows(), n);
      out.executed.resize(b.executed.rows(), n);
      out.log_prob.resize(n);
      out.value.resize(n);
    }
    out.action.col(j) = b.action.col(0);
    out.executed.col(j) = b.executed.col(0);
    out.log_prob[j] = b.log_prob[0];
    out.value[j] = b.value[0];
  }
  return out;
}

}  // namespace

std::vector<EpisodeRecord> run_inference(const EnvConfig& env, const ActorCritic<float>& uav,
                                         const ActorCritic<float>* ugv, EvalMode mode,
                                         const InferenceOptions& options) {
  if (options.episodes < 1) throw UsageError("evaluation needs at least one episode");
  if (options.batch < 1) throw UsageError("evaluation batch must be >= 1");
  if (uav.obs_dim() != kUavObsDim || uav.kind() != ActionKind::continuous || uav.action_dim() != kUavActionDim)
    throw ShapeError("UAV policy has the wrong shape");
  if (mode == EvalMode::system) {
    if (!ugv) throw UsageError("system evaluation needs a UGV policy");
    if (ugv->obs_dim() != kUgvObsDim || ugv->kind() != ActionKind::discrete || ugv->action_dim() != kUgvActionCount)
      throw ShapeError("UGV policy has the wrong shape");
  }
  const double dt = env.vehicles.dt;
  std::vector<EpisodeRecord> records(static_cast<std::size_t>(options.episodes));

  for (int first = 0; first < options.episodes; first += options.batch) {
    const int count = std::min(options.batch, options.episodes - first);
    std::vector<EnvInstance> inst;
    std::vector<Rng> uav_rng, ugv_rng;
    inst.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
      const int j = first + k;
      const std::uint64_t seed = eval_episode_seed(options.seed, j);
      inst.emplace_back(env);
      inst.back().reset(seed);
      uav_rng.push_back(Rng::stream(seed, "eval-uav"));
      ugv_rng.push_back(Rng::stream(seed, "eval-ugv"));
      EpisodeRecord& r = records[static_cast<std::size_t>(j)];
      r.seed = seed;
      r.variant = to_string(env.variant.name);
      const auto& s = inst.back().state();
      if (options.record_paths) {
        r.uav_path.push_back(point(0, s.uav.p_w.x(), s.uav.p_w.y(), s.uav.p_w.z(), 0, 0));
        r.ugv_path.push_back(point(0, s.ugv.position.x(), s.ugv.position.y(), 0, 0, 0));
      }
    }

    std::vector<int> alive(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) alive[static_cast<std::size_t>(k)] = k;
    while (!alive.empty()) {
      std::vector<ObsVec> uo, go;
      std::vector<Rng*> ur, gr;
      for (int k : alive) {
        const auto& e = inst[static_cast<std::size_t>(k)];
        // A UAV parked at the target no longer acts; its observation is still valid input.
        uo.push_back(e.uav_obs());
        ur.push_back(&uav_rng[static_cast<std::size_t>(k)]);
        if (mode == EvalMode::system) {
          go.push_back(e.ugv_obs());
          gr.push_back(&ugv_rng[static_cast<std::size_t>(k)]);
        }
      }
      const ActionBatch ua = act_per_column(uav, stack(uo), ur, options.stochastic);
      ActionBatch ga;
      if (mode == EvalMode::system) ga = act_per_column(*ugv, stack(go), gr, options.stochastic);

      std::vector<int> still;
      for (std::size_t c = 0; c < alive.size(); ++c) {
        const int k = alive[c];
        EnvInstance& e = inst[static_cast<std::size_t>(k)];
        const int action =
            mode == EvalMode::system ? to_ugv_action(ga.executed(0, static_cast<Eigen::Index>(c))) : kUgvHold;
        const StepResult res = e.step(to_command(ua.executed.col(static_cast<Eigen::Index>(c))), action);
        EpisodeRecord& r = records[static_cast<std::size_t>(first + k)];
        const auto& s = e.state();
        if (options.record_paths) {
          const double t = s.steps * dt;
          r.uav_path.push_back(point(t, s.uav.p_w.x(), s.uav.p_w.y(), s.uav.p_w.z(), res.reward_uav, s.return_uav));
          r.ugv_path.push_back(point(t, s.ugv.position.x(), s.ugv.position.y(), 0, res.reward_ugv, s.return_ugv));
        }
        if (res.done) {
          r.steps = s.steps;
          r.done_reason = res.done_reason;
          r.return_uav = s.return_uav;
          r.return_ugv = s.return_ugv;
          r.uav_arrived = s.uav_arrived;
          r.success = is_success(res.done_reason);
        } else {
          still.push_back(k);
        }
      }
      alive.swap(still);
    }
  }
  return records;
}

Interval wilson_interval(long successes, long trials) {
  if (trials <= 0) throw UsageError("an interval needs at least one trial");
  if (successes < 0 || successes > trials) throw UsageError("successes must lie in [0, trials]");
  const double z = 1.959963984540054;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double denom = 1.0 + z * z / n;
  const double center = (p + z * z / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
  Interval out;
  out.lower = successes == 0 ? 0.0 : std::max(0.0, center - half);
  out.upper = successes == trials ? 1.0 : std::min(1.0, center + half);
  return out;
}

Metrics compute_metrics(const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw UsageError("metrics need at least one episode record");
  Metrics m;
  m.episodes = static_cast<long>(records.size());
  long arrivals = 0, collisions = 0, timeouts = 0;
  double success_steps = 0;
  for (const auto& r : records) {
    if (r.success) {
      ++m.successes;
      success_steps += r.steps;
    }
    if (r.uav_arrived) ++arrivals;
    if (r.done_reason == DoneReason::uav_collision || r.done_reason == DoneReason::ugv_collision) ++collisions;
    if (r.done_reason == DoneReason::timeout) ++timeouts;
  }
  const double n = static_cast<double>(m.episodes);
  m.success_rate = static_cast<double>(m.successes) / n;
  m.uav_arrival_rate = static_cast<double>(arrivals) / n;
  m.collision_rate = static_cast<double>(collisions) / n;
  m.timeout_rate = static_cast<double>(timeouts) / n;
  m.mean_steps_success = m.successes > 0 ? success_steps / static_cast<double>(m.successes) : std::nan("");
  m.interval = wilson_interval(m.successes, m.episodes);
  return m;
}

std::string format_percent(double rate) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f%%", std::round(rate * 1000.0) / 10.0);
  return buf;
}

std::string metrics_table(const Metrics& m) {
  std::ostringstream out;
  out << "episodes          " << m.episodes << "\n"
      << "success rate      " << format_percent(m.success_rate) << "  (" << m.successes << "/" << m.episodes << ")\n"
      << "95% interval      [" << format_percent(m.interval.lower) << ", " << format_percent(m.interval.upper)
      << "]\n"
      << "UAV arrival rate  " << format_percent(m.uav_arrival_rate) << "\n"
      << "collision rate    " << format_percent(m.collision_rate) << "\n"
      << "timeout rate      " << format_percent(m.timeout_rate) << "\n"
      << "mean steps (succ) " << fmt_sig(m.mean_steps_success, 6) << "\n";
  return out.str();
}

std::string metrics_key_values(const Metrics& m) {
  std::ostringstream out;
  out << "episodes=" << m.episodes << "\n"
      << "successes=" << m.successes << "\n"
      << "success_rate=" << fmt_exact(m.success_rate) << "\n"
      << "success_lower=" << fmt_exact(m.interval.lower) << "\n"
      << "success_upper=" << fmt_exact(m.interval.upper) << "\n"
      << "uav_arrival_rate=" << fmt_exact(m.uav_arrival_rate) << "\n"
      << "collision_rate=" << fmt_exact(m.collision_rate) << "\n"
      << "timeout_rate=" << fmt_exact(m.timeout_rate) << "\n"
      << "mean_steps_success=" << fmt_exact(m.mean_steps_success) << "\n";
  return out.str();
}

namespace {

const char* kCsvHeader = "t,agent,x,y,z,reward,cum_reward,done_reason";

std::string num(float v) { return fmt_sig(static_cast<double>(v), 9); }

void csv_row(std::ostream& out, const PathPoint& p, const char* agent, const char* reason) {
  out << num(p.t) << ',' << agent << ',' << num(p.x) << ',' << num(p.y) << ',' << num(p.z) << ',' << num(p.reward)
      << ',' << num(p.cum_reward) << ',' << reason << '\n';
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

float parse_float(const std::string& s) { return static_cast<float>(parse_double(s)); }

}  // namespace

std::string trajectory_csv(const EpisodeRecord& r) {
  if (r.uav_path.size() != r.ugv_path.size()) throw UsageError("UAV and UGV paths differ in length");
  std::ostringstream out;
  out << kCsvHeader << '\n';
  const std::size_t n = r.uav_path.size();
  for (std::size_t k = 0; k < n; ++k) {
    const char* reason = k + 1 == n ? to_string(r.done_reason) : to_string(DoneReason::running);
    csv_row(out, r.uav_path[k], "uav", reason);
    csv_row(out, r.ugv_path[k], "ugv", reason);
  }
  return out.str();
}

void write_trajectory_csv(const EpisodeRecord& r, const std::string& path) {
  write_text_file(path, trajectory_csv(r));
}

EpisodeRecord parse_trajectory_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw IoError("trajectory CSV: unexpected header");
  EpisodeRecord r;
  int lineno = 1;
  std::string last_reason = "running";
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 8) throw IoError("trajectory CSV line " + std::to_string(lineno) + ": expected 8 fields");
    PathPoint p;
    try {
      p = {parse_float(f[0]), parse_float(f[2]), parse_float(f[3]), parse_float(f[4]), parse_float(f[5]),
           parse_float(f[6])};
    } catch (const ConfigError& e) {
      throw IoError("trajectory CSV line " + std::to_string(lineno) + ": " + e.what());
    }
    if (f[1] == "uav") {
      r.uav_path.push_back(p);
    } else if (f[1] == "ugv") {
      r.ugv_path.push_back(p);
    } else {
      throw IoError("trajectory CSV line " + std::to_string(lineno) + ": unknown agent '" + f[1] + "'");
    }
    last_reason = f[7];
  }
  if (r.uav_path.empty()) throw IoError("trajectory CSV has no rows");
  r.steps = static_cast<int>(r.uav_path.size()) - 1;
  r.done_reason = parse_done_reason(last_reason);
  r.return_uav = r.uav_path.back().cum_reward;
  r.return_ugv = r.ugv_path.empty() ? 0.0 : r.ugv_path.back().cum_reward;
  r.success = is_success(r.done_reason);
  return r;
}

EpisodeRecord read_trajectory_csv(const std::string& path) { return parse_trajectory_csv(read_text_file(path)); }

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string g6(double v) { return fmt_sig(v, 6); }

std::string path_data(const std::vector<PathPoint>& pts) {
  std::string d;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    d += (k == 0 ? "M " : " L ");
    d += num(pts[k].x) + " " + num(pts[k].y);
  }
  return d;
}

}  // namespace

std::string render_trajectory_svg(const WorldGeometry& world, const std::vector<EpisodeRecord>& records) {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& p : world.free_space_polygon) {
    if (first) {
      xmin = xmax = p.x();
      ymin = ymax = p.y();
      first = false;
    }
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  }
  const double margin = 2.0;
  xmin -= margin;
  ymin -= margin;
  const double w = xmax - xmin + margin;
  const double h = ymax - ymin + margin + (records.empty() ? 0.0 : 6.0);
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"" << g6(xmin) << ' ' << g6(ymin) << ' '
      << g6(w) << ' ' << g6(h) << "\" width=\"" << g6(w * 12) << "\" height=\"" << g6(h * 12) << "\">\n"
      << "<rect x=\"" << g6(xmin) << "\" y=\"" << g6(ymin) << "\" width=\"" << g6(w) << "\" height=\"" << g6(h)
      << "\" fill=\"#ffffff\"/>\n";
  out << "<g id=\"walls\" stroke=\"#303030\" stroke-width=\"0.2\">\n";
  for (const auto& s : world.wall_segments)
    out << "<line x1=\"" << g6(s.a.x()) << "\" y1=\"" << g6(s.a.y()) << "\" x2=\"" << g6(s.b.x()) << "\" y2=\""
        << g6(s.b.y()) << "\"/>\n";
  out << "</g>\n<g id=\"obstacles\" fill=\"#909090\" stroke=\"#505050\" stroke-width=\"0.05\">\n";
  for (const auto& o : world.obstacles) {
    out << "<polygon points=\"";
    const auto c = obstacle_corners(o);
    for (std::size_t k = 0; k < c.size(); ++k) out << (k ? " " : "") << g6(c[k].x()) << ',' << g6(c[k].y());
    out << "\"/>\n";
  }
  out << "</g>\n<circle id=\"target\" cx=\"" << g6(world.target_position.x()) << "\" cy=\""
      << g6(world.target_position.y()) << "\" r=\"" << g6(world.target_radius)
      << "\" fill=\"#f4c0c0\" stroke=\"#c00000\" stroke-width=\"0.1\"/>\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    out << "<path id=\"uav-path-" << i << "\" class=\"uav\" fill=\"none\" stroke=\"#1f5fbf\" stroke-width=\"0.15\" d=\""
        << path_data(records[i].uav_path) << "\"/>\n";
    out << "<path id=\"ugv-path-" << i << "\" class=\"ugv\" fill=\"none\" stroke=\"#d07000\" stroke-width=\"0.15\" "
        << "stroke-dasharray=\"0.5 0.3\" d=\"" << path_data(records[i].ugv_path) << "\"/>\n";
  }
  if (!records.empty()) {
    const double lx = xmin + 1.0, ly = ymax + margin + 1.0;
    out << "<g id=\"legend\" font-family=\"sans-serif\" font-size=\"1.2\">\n"
        << "<line x1=\"" << g6(lx) << "\" y1=\"" << g6(ly) << "\" x2=\"" << g6(lx + 3) << "\" y2=\"" << g6(ly)
        << "\" stroke=\"#1f5fbf\" stroke-width=\"0.15\"/>\n"
        << "<text x=\"" << g6(lx + 3.5) << "\" y=\"" << g6(ly + 0.4) << "\">UAV</text>\n"
        << "<line x1=\"" << g6(lx) << "\" y1=\"" << g6(ly + 2) << "\" x2=\"" << g6(lx + 3) << "\" y2=\""
        << g6(ly + 2) << "\" stroke=\"#d07000\" stroke-width=\"0.15\" stroke-dasharray=\"0.5 0.3\"/>\n"
        << "<text x=\"" << g6(lx + 3.5) << "\" y=\"" << g6(ly + 2.4) << "\">UGV</text>\n"
        << "</g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::vector<CurveSeries> read_metrics_curves(const std::string& tsv_text, const std::string& column) {
  std::istringstream in(tsv_text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("metrics log is empty");
  const auto header = split(line, '\t');
  auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IoError("metrics log has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_run = col("run"), c_agent = col("agent"), c_step = col("step"), c_val = col(column);
  std::vector<CurveSeries> series;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != header.size()) throw IoError("metrics log line " + std::to_string(lineno) + ": wrong field count");
    const auto key = std::make_pair(f[c_run], f[c_agent]);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, series.size()).first;
      series.push_back({f[c_run], f[c_agent], {}});
    }
    const double v = parse_double(f[c_val]);
    if (std::isnan(v)) continue;
    series[it->second].points.push_back({parse_double(f[c_step]), v});
  }
  return series;
}

std::string render_curves_svg(const std::vector<CurveSeries>& series, const std::string& title) {
  static const char* colors[] = {"#1f5fbf", "#d07000", "#2a9d3a", "#b0207a", "#6b4fbf", "#7a7a00", "#00808a"};
  const double W = 800, H = 500, left = 70, right = 20, top = 40, bottom = 50;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const auto& s : series)
    for (const auto& p : s.points) {
      if (!any) {
        xmin = xmax = p.step;
        ymin = ymax = p.value;
        any = true;
      }
      xmin = std::min(xmin, p.step);
      xmax = std::max(xmax, p.step);
      ymin = std::min(ymin, p.value);
      ymax = std::max(ymax, p.value);
    }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto px = [&](double x) { return left + (W - left - right) * (x - xmin) / (xmax - xmin); };
  auto py = [&](double y) { return H - bottom - (H - top - bottom) * (y - ymin) / (ymax - ymin); };

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"#ffffff\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title)
      << "</text>\n"
      << "<g id=\"axes\" stroke=\"#000000\" stroke-width=\"1\">\n"
      << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
      << "\"/>\n"
      << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom << "\"/>\n"
      << "</g>\n"
      << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">step</text>\n"
      << "<text x=\"" << left << "\" y=\"" << H - bottom + 16 << "\" text-anchor=\"middle\">" << g6(xmin)
      << "</text>\n"
      << "<text x=\"" << W - right << "\" y=\"" << H - bottom + 16 << "\" text-anchor=\"middle\">" << g6(xmax)
      << "</text>\n"
      << "<text x=\"" << left - 6 << "\" y=\"" << H - bottom << "\" text-anchor=\"end\">" << g6(ymin) << "</text>\n"
      << "<text x=\"" << left - 6 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\">" << g6(ymax) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = colors[i % (sizeof colors / sizeof *colors)];
    out << "<path id=\"series-" << i << "\" data-run=\"" << xml_escape(s.run) << "\" data-agent=\""
        << xml_escape(s.agent) << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
    if (i >= sizeof colors / sizeof *colors) out << " stroke-dasharray=\"6 3\"";
    out << " d=\"";
    for (std::size_t k = 0; k < s.points.size(); ++k)
      out << (k ? " L " : "M ") << g6(px(s.points[k].step)) << ' ' << g6(py(s.points[k].value));
    out << "\"/>\n";
  }
  out << "<g id=\"legend\">\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = top + 10 + 16.0 * static_cast<double>(i);
    out << "<rect x=\"" << left + 12 << "\" y=\"" << y - 8 << "\" width=\"14\" height=\"4\" fill=\""
        << colors[i % (sizeof colors / sizeof *colors)] << "\"/>\n"
        << "<text x=\"" << left + 32 << "\" y=\"" << y - 2 << "\">" << xml_escape(series[i].run) << " / "
        << xml_escape(series[i].agent) << "</text>\n";
  }
  out << "</g>\n</svg>\n";
  return out.str();
}

std::string read_text_file(const std::string& path) {
  if (path.empty()) throw UsageError("empty path");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  if (path.empty()) throw UsageError("empty path");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace minesearch
