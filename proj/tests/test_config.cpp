#include <doctest.h>

#include <map>
#include <string>

#include "minesearch/config.hpp"
#include "minesearch/errors.hpp"

using namespace minesearch;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("empty file yields the default hyperparameters") {
  const RunConfig c = parse_config("");
  CHECK(c.uav.schedule.initial == 0.0003);
  CHECK(c.ugv.schedule.initial == 0.0002);
  CHECK(c.uav.ppo.epsilon == 0.2);
  CHECK(c.ugv.ppo.epsilon == 0.3);
  CHECK(c.uav.icm.strength == 0.02);
  CHECK(c.ugv.icm.strength == 0.05);
  for (const AgentConfig* a : {&c.uav, &c.ugv}) {
    CHECK(a->ppo.entropy_coef == 0.03);
    CHECK(a->ppo.lambda == 0.95);
    CHECK(a->ppo.gamma == 0.99);
    CHECK(a->ppo.extrinsic_strength == 1.0);
    CHECK(a->icm.gamma == 0.99);
    CHECK(a->icm.learning_rate == 0.0003);
    CHECK(a->schedule.mode == LrSchedule::Mode::linear);
    CHECK(a->schedule.total_steps == 1e7);
    CHECK(a->hidden == 256);
  }
  CHECK(c.num_instances == 30);
  CHECK(c.max_step == 10000000);
  CHECK(c.gate.window_steps == 10000);
  CHECK(c.gate.threshold == 5000.0);
  CHECK(c.gate.required_consecutive == 50);
  CHECK(c.env.rewards.r_collision_ugv == -15000.0);
  CHECK(c.env.rewards.r_time == -0.1);
  CHECK(c.env.variant.name == VariantName::original);
}

TEST_CASE("range violations name the key and the line") {
  const std::string e = error_of("# comment\n\nuav.epsilon = 1.5\n");
  CHECK(contains(e, "line 3"));
  CHECK(contains(e, "uav.epsilon"));

  CHECK(contains(error_of("run.seed = 1\nugv.lambd = 0\n"), "line 2"));
  CHECK(contains(error_of("run.num_instances = 0\n"), "run.num_instances"));
  CHECK(contains(error_of("env.corridor_width = -3\n"), "line 1"));
}

TEST_CASE("type mismatches are reported") {
  CHECK(contains(error_of("uav.epsilon = wide\n"), "line 1: uav.epsilon"));
  CHECK(contains(error_of("run.num_instances = 2.5\n"), "run.num_instances"));
  CHECK(contains(error_of("run.keep_checkpoints = maybe\n"), "run.keep_checkpoints"));
  CHECK(contains(error_of("run.seed = -1\n"), "run.seed"));
  CHECK(contains(error_of("just words\n"), "line 1"));
  CHECK(contains(error_of("[run\n"), "section"));
}

TEST_CASE("unknown keys suggest the nearest match") {
  const std::string e = error_of("lamda = 0.9\n");
  CHECK(contains(e, "unknown key 'lamda'"));
  CHECK(contains(e, "lambd'"));
  CHECK(contains(error_of("[uav]\nlamda = 0.9\n"), "'uav.lambd'"));
  CHECK(contains(error_of("ugv.curiosity_strenght = 0.1\n"), "'ugv.curiosity_strength'"));
  CHECK(contains(error_of("run.seed = 1\nrun.seed = 2\n"), "duplicate"));
}

TEST_CASE("sections prefix keys") {
  const RunConfig c = parse_config("[uav]\nepsilon = 0.1\n[ugv]\nbeta = 0.01\nrun.seed = 9\n");
  CHECK(c.uav.ppo.epsilon == 0.1);
  CHECK(c.ugv.ppo.entropy_coef == 0.01);
  CHECK(c.seed == 9);
}

TEST_CASE("the variant applies before its overrides regardless of order") {
  const RunConfig c = parse_config("env.corridor_width = 9\nenv.variant = complex\n");
  CHECK(c.env.variant.name == VariantName::complex);
  CHECK(c.env.variant.corridor_width == 9.0);
  CHECK(c.env.variant.obstacle_layout_id == EnvVariant::complex().obstacle_layout_id);
}

TEST_CASE("printing and parsing is a fixed point") {
  const std::string d = print_config(default_config());
  CHECK(print_config(parse_config(d)) == d);

  RunConfig c = default_config();
  c.seed = 18446744073709551615ull;
  c.uav.schedule.initial = 0.1 + 0.2;
  c.ugv.ppo.epsilon = 1.0 / 3.0;
  c.env.rewards.alpha = 1e-300;
  c.env.variant = EnvVariant::complex();
  c.env.uav_mode = UavMode::rigid;
  c.uav.schedule.mode = LrSchedule::Mode::constant;
  c.keep_checkpoints = true;
  c.name = "ablation";
  const std::string text = print_config(c);
  const RunConfig back = parse_config(text);
  CHECK(print_config(back) == text);
  CHECK(back.uav.schedule.initial == 0.1 + 0.2);
  CHECK(back.ugv.ppo.epsilon == 1.0 / 3.0);
  CHECK(back.seed == c.seed);
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(back) != config_hash(default_config()));

  // Every key appears once, in registry order.
  const auto keys = config_keys();
  std::size_t pos = 0;
  for (const auto& k : keys) {
    const auto at = text.find("\n" + k + " = ", pos == 0 ? 0 : pos - 1);
    REQUIRE(at != std::string::npos);
    pos = at + 1;
  }
}

TEST_CASE("max_step sets both schedule horizons") {
  const RunConfig c = parse_config("run.max_step = 5000\n");
  CHECK(c.uav.schedule.total_steps == 5000.0);
  CHECK(c.ugv.schedule.total_steps == 5000.0);
}

TEST_CASE("environment variables override fields") {
  std::map<std::string, std::string> vars{{"MINESEARCH_UAV_EPSILON", "0.25"},
                                          {"MINESEARCH_RUN_NUM_INSTANCES", "4"},
                                          {"MINESEARCH_ENV_VARIANT", "complex"},
                                          {"MINESEARCH_RUN_MAX_STEP", "700"}};
  auto lookup = [&](const std::string& n) -> const char* {
    auto it = vars.find(n);
    return it == vars.end() ? nullptr : it->second.c_str();
  };
  RunConfig c = default_config();
  apply_env_overrides(c, lookup);
  CHECK(c.uav.ppo.epsilon == 0.25);
  CHECK(c.num_instances == 4);
  CHECK(c.env.variant.name == VariantName::complex);
  CHECK(c.ugv.schedule.total_steps == 700.0);

  vars = {{"MINESEARCH_UGV_EPSILON", "2"}};
  RunConfig d = default_config();
  CHECK_THROWS_AS(apply_env_overrides(d, lookup), ConfigError);
}

TEST_CASE("edit distance") {
  CHECK(edit_distance("", "") == 0);
  CHECK(edit_distance("lamda", "lambd") == 2);
  CHECK(edit_distance("kitten", "sitting") == 3);
  CHECK(edit_distance("abc", "") == 3);
}
