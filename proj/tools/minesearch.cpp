// Command-line entry point: train, resume, eval, render, config.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "minesearch/errors.hpp"
#include "minesearch/evalkit.hpp"
#include "minesearch/format.hpp"
#include "minesearch/trainer.hpp"

using namespace minesearch;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitGateTimeout = 3;

TrainOptions train_options(bool verbose, bool quiet) {
  TrainOptions o;
  o.verbose = verbose;
  if (!quiet) o.log = [](const std::string& line) { std::cerr << line << '\n'; };
  return o;
}

int report(const TrainResult& r) {
  std::cerr << r.message << " (stage " << to_string(r.stage) << ", step " << r.global_step << ")\n";
  switch (r.status) {
    case RunStatus::gate_timeout: return kExitGateTimeout;
    default: return 0;
  }
}

void apply_sets(RunConfig& c, const std::vector<std::string>& sets) {
  if (sets.empty()) return;
  // Re-parse the full text so overrides get the same checks as a file.
  std::string text = print_config(c);
  std::string extra;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    const std::string key = trim(s.substr(0, eq));
    const auto at = text.find("\n" + key + " = ");
    const auto start = text.rfind(key + " = ", 0) == 0 ? 0 : (at == std::string::npos ? std::string::npos : at + 1);
    if (start == std::string::npos) {
      extra += s + "\n";  // unknown keys fall through to the parser's diagnostic
      continue;
    }
    const auto end = text.find('\n', start);
    text.replace(start, end - start, key + " = " + trim(s.substr(eq + 1)));
  }
  c = parse_config(text + extra);
}

EnvVariant variant_named(const std::string& name) {
  return parse_variant_name(name) == VariantName::complex ? EnvVariant::complex() : EnvVariant::original();
}

std::string episodes_tsv(const std::vector<EpisodeRecord>& recs) {
  std::ostringstream o;
  o << "episode\tseed\tvariant\tsteps\tdone_reason\treturn_uav\treturn_ugv\tuav_arrived\tsuccess\n";
  for (std::size_t j = 0; j < recs.size(); ++j) {
    const auto& r = recs[j];
    o << j << '\t' << r.seed << '\t' << r.variant << '\t' << r.steps << '\t' << to_string(r.done_reason) << '\t'
      << fmt_exact(r.return_uav) << '\t' << fmt_exact(r.return_ugv) << '\t' << (r.uav_arrived ? 1 : 0) << '\t'
      << (r.success ? 1 : 0) << '\n';
  }
  return o.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV-UGV tunnel search simulator and two-stage PPO trainer"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train the UAV, then both agents");
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  bool baseline = false, no_icm = false, verbose = false, quiet = false;
  int workers = 0;
  std::vector<std::string> sets;
  train->add_option("--config", config_path, "Config file (defaults when omitted)")->check(CLI::ExistingFile);
  auto* seed_opt = train->add_option("--seed", seed, "Master seed");
  train->add_option("--out", out_dir, "Output directory");
  train->add_flag("--simultaneous-baseline", baseline, "Train both agents from scratch with no stage 1");
  train->add_flag("--no-icm", no_icm, "Set both curiosity strengths to zero");
  train->add_option("--workers", workers, "Environment worker threads")->check(CLI::PositiveNumber);
  train->add_option("--set", sets, "Override a config field, key=value");
  train->add_flag("--verbose", verbose, "Mirror metric rows to stdout");
  train->add_flag("--quiet", quiet, "No progress lines on stderr");

  // resume
  auto* resume = app.add_subcommand("resume", "Continue training from a checkpoint");
  std::string checkpoint, expect_config;
  resume->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  resume->add_option("--out", out_dir, "Output directory (default: the run's own)");
  resume->add_option("--config", expect_config, "Refuse unless the checkpoint was written under this config")
      ->check(CLI::ExistingFile);
  resume->add_flag("--verbose", verbose, "Mirror metric rows to stdout");
  resume->add_flag("--quiet", quiet, "No progress lines on stderr");

  // eval
  auto* eval = app.add_subcommand("eval", "Run inference episodes and report success rates");
  int episodes = 1000, save_paths = 0;
  std::string variant, mode = "system";
  bool stochastic = false;
  std::uint64_t eval_seed = 0;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes, "Episode count")->check(CLI::PositiveNumber);
  eval->add_option("--variant", variant, "Environment variant (default: the run's)")
      ->check(CLI::IsMember({"original", "complex"}));
  eval->add_option("--mode", mode, "system or uav_only")->check(CLI::IsMember({"system", "uav_only"}));
  eval->add_option("--seed", eval_seed, "Evaluation seed");
  eval->add_flag("--stochastic", stochastic, "Sample actions instead of taking the mode");
  eval->add_option("--out", out_dir, "Write metrics, an episode table and trajectories here");
  eval->add_option("--save-paths", save_paths, "Trajectory CSV and SVG for the first N episodes")
      ->check(CLI::NonNegativeNumber);

  // render
  auto* render = app.add_subcommand("render", "Draw trajectories or training curves as SVG");
  std::vector<std::string> inputs;
  std::string render_mode, render_out, column = "mean_return", title = "Mean episode return";
  std::uint64_t world_seed = 0;
  render->add_option("--input", inputs, "Trajectory CSV or metrics TSV files")->required()->check(CLI::ExistingFile);
  render->add_option("--mode", render_mode, "trajectory or curves")
      ->required()
      ->check(CLI::IsMember({"trajectory", "curves"}));
  render->add_option("--out", render_out, "SVG file")->required();
  render->add_option("--config", config_path, "Config whose world layout to draw")->check(CLI::ExistingFile);
  render->add_option("--variant", variant, "World variant")->check(CLI::IsMember({"original", "complex"}));
  render->add_option("--world-seed", world_seed, "Episode seed of the world (see episodes.tsv)");
  render->add_option("--column", column, "Metrics column for curves");
  render->add_option("--title", title, "Curve plot title");

  // config
  auto* config = app.add_subcommand("config", "Inspect configuration");
  bool print_defaults = false;
  std::string check_path;
  config->add_flag("--print-defaults", print_defaults, "Print every field with its default");
  config->add_option("--check", check_path, "Validate a config file and print it in full")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train) {
      RunConfig c = config_path.empty() ? default_config() : load_config(config_path);
      apply_env_overrides(c);
      apply_sets(c, sets);
      if (*seed_opt) c.seed = seed;
      if (!out_dir.empty()) c.out = out_dir;
      if (workers > 0) c.workers = workers;
      if (baseline) c.simultaneous_baseline = true;
      if (no_icm) {
        c.uav.icm.strength = 0;
        c.ugv.icm.strength = 0;
      }
      validate(c);
      Trainer t(c, train_options(verbose, quiet));
      return report(t.run());
    }
    if (*resume) {
      if (!expect_config.empty()) {
        RunConfig want = load_config(expect_config);
        check_checkpoint_config(checkpoint, want);
      }
      Trainer t = Trainer::resume(checkpoint, train_options(verbose, quiet), out_dir);
      return report(t.run());
    }
    if (*eval) {
      const CheckpointInfo info = read_checkpoint_info(checkpoint);
      EnvConfig env = info.config.env;
      if (!variant.empty()) env.variant = variant_named(variant);
      ActorCritic<float> uav, ugv;
      bool has_ugv = false;
      load_policies(checkpoint, uav, ugv, has_ugv);
      const EvalMode m = mode == "system" ? EvalMode::system : EvalMode::uav_only;
      if (m == EvalMode::system && !has_ugv)
        throw UsageError("checkpoint holds no trained UGV policy; use --mode uav_only");
      InferenceOptions o;
      o.episodes = episodes;
      o.seed = eval_seed;
      o.stochastic = stochastic;
      o.record_paths = save_paths > 0;
      const auto recs = run_inference(env, uav, m == EvalMode::system ? &ugv : nullptr, m, o);
      const Metrics metrics = compute_metrics(recs);
      std::cout << "variant " << to_string(env.variant.name) << ", mode " << to_string(m) << ", checkpoint step "
                << info.global_step << "\n"
                << metrics_table(metrics);
      if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_text_file(out_dir + "/metrics.txt", metrics_key_values(metrics));
        write_text_file(out_dir + "/episodes.tsv", episodes_tsv(recs));
        for (int j = 0; j < std::min(save_paths, episodes); ++j) {
          const auto& r = recs[static_cast<std::size_t>(j)];
          const std::string stem = out_dir + "/trajectory-" + std::to_string(j);
          write_trajectory_csv(r, stem + ".csv");
          write_text_file(stem + ".svg", render_trajectory_svg(build_world(env.variant, env.layout, r.seed), {r}));
        }
      }
      return 0;
    }
    if (*render) {
      if (render_mode == "curves") {
        std::string text;
        for (std::size_t k = 0; k < inputs.size(); ++k) {
          const std::string body = read_text_file(inputs[k]);
          text += k == 0 ? body : body.substr(std::min(body.size(), body.find('\n') + 1));
        }
        write_text_file(render_out, render_curves_svg(read_metrics_curves(text, column), title));
      } else {
        RunConfig c = config_path.empty() ? default_config() : load_config(config_path);
        EnvVariant v = variant.empty() ? c.env.variant : variant_named(variant);
        std::vector<EpisodeRecord> recs;
        for (const auto& in : inputs) recs.push_back(read_trajectory_csv(in));
        write_text_file(render_out, render_trajectory_svg(build_world(v, c.env.layout, world_seed), recs));
      }
      return 0;
    }
    if (*config) {
      if (!check_path.empty()) {
        std::cout << print_config(load_config(check_path));
      } else if (print_defaults) {
        std::cout << print_config(default_config());
      } else {
        std::cerr << config->help();
        return kExitUsage;
      }
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "minesearch: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "minesearch: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
