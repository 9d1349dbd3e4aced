#include <doctest.h>

#include <cmath>
#include <numbers>

#include "full_gradcheck.hpp"
#include "minesearch/errors.hpp"
#include "minesearch/icm.hpp"
#include "minesearch/ppo.hpp"
#include "oracles.hpp"

using namespace minesearch;

TEST_CASE("gae examples") {
  const auto r = compute_gae({1, 1}, {0.5, 0.5}, {false, false}, 0.0, 0.99, 0.95);
  CHECK(r.advantages[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.advantages[0] == doctest::Approx(1.46525).epsilon(1e-14));
  CHECK(r.returns[0] == doctest::Approx(1.96525).epsilon(1e-14));

  // lambda = 0 is the one-step TD error.
  const auto z = compute_gae({1, -2, 3}, {0.3, 0.1, -0.4}, {false, true, false}, 2.0, 0.9, 0.0);
  CHECK(z.advantages[0] == 1 + 0.9 * 0.1 - 0.3);
  CHECK(z.advantages[1] == -2 - 0.1);
  CHECK(z.advantages[2] == 3 + 0.9 * 2.0 + 0.4);

  CHECK_THROWS_AS(compute_gae({1}, {0.5, 0.5}, {false}, 0.0, 0.99, 0.95), ShapeError);
}

TEST_CASE("gae matches brute-force summation") {
  Rng rng = Rng::stream(11, "gae");
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(16);
    std::vector<double> r(n), v(n);
    std::vector<bool> d(n);
    for (std::size_t t = 0; t < n; ++t) {
      r[t] = rng.uniform(-10, 10);
      v[t] = rng.uniform(-10, 10);
      d[t] = rng.uniform() < 0.2;
    }
    const double boot = rng.uniform(-10, 10);
    const double gamma = rng.uniform(0.5, 1.0);
    const double lambda = rng.uniform(0.0, 1.0);
    const auto got = compute_gae(r, v, d, boot, gamma, lambda);
    const auto want = oracle::gae_by_sum(r, v, d, boot, gamma, lambda);
    for (std::size_t t = 0; t < n; ++t) {
      REQUIRE(std::abs(got.advantages[t] - want[t]) <= 1e-10);
      REQUIRE(got.returns[t] == got.advantages[t] + v[t]);
    }
  }
}

TEST_CASE("clip and surrogate") {
  CHECK(clip_ratio(1.5, 0.2) == 1.2);
  CHECK(clip_ratio(0.5, 0.2) == 0.8);
  CHECK(clip_ratio(1.0, 0.37) == 1.0);

  PpoConfig cfg;
  auto o = ppo_objective({std::log(1.5)}, {0.0}, {2.0}, 0.0, 0.0, 0.0, cfg);
  CHECK(o.surrogate == doctest::Approx(2.4).epsilon(1e-15));
  CHECK(o.clip_fraction == 1.0);

  o = ppo_objective({-1.0, -2.0, -0.5}, {-1.0, -2.0, -0.5}, {1.0, -3.0, 0.5}, 0.0, 0.0, 0.0, cfg);
  CHECK(o.surrogate == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(o.clip_fraction == 0.0);
  CHECK(o.mean_ratio == 1.0);

  // Negative advantage with a huge ratio takes the pessimistic clipped term.
  o = ppo_objective({5.0}, {0.0}, {-1.0}, 0.0, 0.0, 0.0, cfg);
  CHECK(o.surrogate == doctest::Approx(-std::exp(5.0)).epsilon(1e-14));
  o = ppo_objective({-5.0}, {0.0}, {-1.0}, 0.0, 0.0, 0.0, cfg);
  CHECK(o.surrogate == doctest::Approx(-0.8).epsilon(1e-15));

  // Loss sign convention.
  o = ppo_objective({0.0}, {0.0}, {2.0}, 1.5, 4.0, 0.1, cfg);
  CHECK(o.loss == doctest::Approx(-(2.0 + 0.15) + 0.5 * 4.0).epsilon(1e-15));

  CHECK_THROWS_AS(ppo_objective({NAN}, {0.0}, {1.0}, 0, 0, 0, cfg), NumericError);
  CHECK_THROWS_AS(ppo_objective({0.0}, {0.0, 1.0}, {1.0}, 0, 0, 0, cfg), ShapeError);
}

TEST_CASE("surrogate is the pointwise minimum over random cases") {
  Rng rng = Rng::stream(4, "surr");
  PpoConfig cfg;
  for (int i = 0; i < 2000; ++i) {
    const double lpn = rng.uniform(-3, 1), lpo = rng.uniform(-3, 1), a = rng.uniform(-5, 5);
    cfg.epsilon = rng.uniform(0.05, 0.5);
    const double mu = std::exp(lpn - lpo);
    const auto o = ppo_objective({lpn}, {lpo}, {a}, 0.0, 0.0, 0.0, cfg);
    REQUIRE(o.surrogate == std::min(mu * a, clip_ratio(mu, cfg.epsilon) * a));
  }
}

TEST_CASE("advantage normalization") {
  Rng rng = Rng::stream(8, "norm");
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(2 + rng.below(200));
    const double shift = rng.uniform(-1e4, 1e4), scale = rng.uniform(0.01, 1e4);
    for (double& v : a) v = shift + scale * rng.normal();
    normalize_advantages(a);
    double mean = 0, var = 0;
    for (double v : a) mean += v;
    mean /= static_cast<double>(a.size());
    for (double v : a) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(a.size()));
    CHECK(std::abs(mean) <= 1e-6);
    CHECK(std::abs(sd - 1.0) <= 1e-4);
  }
  std::vector<double> flat(5, 3.0);
  normalize_advantages(flat);
  for (double v : flat) CHECK(v == 0.0);
}

TEST_CASE("full objective gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    for (ActionKind kind : {ActionKind::continuous, ActionKind::discrete}) {
      const auto r = oracle::full_loss_check(seed, kind);
      INFO("seed " << seed << " policy " << r.policy.rel_error << " icm " << r.icm.rel_error);
      CHECK(r.policy.norm > 0.0);
      CHECK(r.icm.norm > 0.0);
      CHECK(r.worst() <= 1e-6);
    }
  }
}

namespace {

ActorCritic<float> make_policy(ActionKind kind, int obs_dim, std::uint64_t seed, int hidden = 16) {
  ActorCritic<float> ac(obs_dim, kind, kind == ActionKind::continuous ? 4 : 8, hidden);
  Rng rng = Rng::stream(seed, "policy");
  ac.init(rng);
  return ac;
}

// Bandit rollouts: constant observation, reward 1 for action 3, every step terminal.
RolloutBuffer bandit_buffer(const ActorCritic<float>& ac, int n, std::uint64_t seed) {
  RolloutBuffer buf(1, n);
  Rng rng = Rng::stream(seed, "bandit");
  Eigen::VectorXf obs = Eigen::VectorXf::Zero(ac.obs_dim());
  obs[0] = 1.0f;
  const auto out = ac.forward(MatT<float>(obs));
  const VecT<float> lsm = log_softmax<float>(out.head.col(0));
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    int a = 0;
    for (; a < 7; ++a) {
      u -= std::exp(static_cast<double>(lsm[a]));
      if (u <= 0) break;
    }
    Transition t;
    t.obs = obs;
    t.next_obs = obs;
    t.action = Eigen::VectorXf::Constant(1, static_cast<float>(a));
    t.executed = t.action;
    t.log_prob = lsm[a];
    t.value = 1000.0 * out.value(0);
    t.reward = a == 3 ? 1.0 : 0.0;
    t.terminal = true;
    t.episode_end = true;
    buf.add(0, t);
  }
  buf.finish({0.0});
  return buf;
}

RolloutBuffer random_buffer(int instances, int horizon, int obs_dim, ActionKind kind, std::uint64_t seed) {
  RolloutBuffer buf(instances, horizon);
  Rng rng = Rng::stream(seed, "buffer");
  for (int i = 0; i < instances; ++i) {
    for (int k = 0; k < horizon; ++k) {
      Transition t;
      t.obs = Eigen::VectorXf::NullaryExpr(obs_dim, [&] { return static_cast<float>(rng.normal()); });
      t.next_obs = Eigen::VectorXf::NullaryExpr(obs_dim, [&] { return static_cast<float>(rng.normal()); });
      if (kind == ActionKind::continuous) {
        t.action = Eigen::VectorXf::NullaryExpr(4, [&] { return static_cast<float>(rng.uniform(-1, 1)); });
        t.executed = t.action;
        t.log_prob = static_cast<float>(rng.uniform(-5, -2));
      } else {
        t.action = Eigen::VectorXf::Constant(1, static_cast<float>(rng.below(8)));
        t.executed = t.action;
        t.log_prob = static_cast<float>(std::log(1.0 / 8.0));
      }
      t.value = rng.uniform(-100, 100);
      t.reward = rng.uniform(-50, 50);
      t.terminal = rng.uniform() < 0.05;
      t.episode_end = t.terminal || rng.uniform() < 0.02;
      t.next_value = t.terminal ? 0.0 : rng.uniform(-100, 100);
      buf.add(i, t);
    }
  }
  std::vector<double> boot(static_cast<std::size_t>(instances));
  for (double& b : boot) b = rng.uniform(-100, 100);
  buf.finish(boot);
  return buf;
}

double entropy_on(const ActorCritic<float>& ac, const Eigen::VectorXf& obs) {
  return categorical_entropy<float>(ac.forward(MatT<float>(obs)).head.col(0));
}

}  // namespace

TEST_CASE("advantage targets handle terminals, truncations and rollout ends") {
  RolloutBuffer buf(2, 3);
  auto tr = [](double r, double v, bool terminal, bool end, double nv, double intr) {
    Transition t;
    t.reward = r;
    t.value = v;
    t.terminal = terminal;
    t.episode_end = end;
    t.next_value = nv;
    t.intrinsic = intr;
    return t;
  };
  buf.add(0, tr(1, 0.5, false, false, 0, 0.1));
  buf.add(0, tr(2, 1.0, false, true, 4.0, 0.2));  // truncated, bootstraps 4
  buf.add(0, tr(3, 2.0, false, false, 0, 0.3));   // rollout end, bootstraps 10
  buf.add(1, tr(-1, 0.0, true, true, 99.0, 0));   // terminal ignores next_value
  buf.add(1, tr(5, 1.0, false, false, 0, 0));
  buf.finish({10.0, 2.0});
  PpoConfig cfg;
  cfg.gamma = 0.9;
  cfg.lambda = 0.5;
  cfg.extrinsic_strength = 2.0;
  std::vector<double> adv, ret;
  advantage_targets(buf, cfg, 0.5, adv, ret);
  REQUIRE(adv.size() == 5);
  const double ext[5] = {3.47, 4.6, 10.0, -1.0, 5.8};
  const double intr[5] = {0.15, 0.2, 0.3, 0, 0};
  const double val[5] = {0.5, 1.0, 2.0, 0.0, 1.0};
  for (int k = 0; k < 5; ++k) {
    CHECK(adv[static_cast<std::size_t>(k)] == doctest::Approx(2.0 * ext[k] + intr[k]).epsilon(1e-14));
    CHECK(ret[static_cast<std::size_t>(k)] == doctest::Approx(ext[k] + val[k]).epsilon(1e-14));
  }
}

TEST_CASE("rollout buffer lifecycle") {
  RolloutBuffer buf(2, 2);
  buf.add(0, Transition{});
  buf.add(0, Transition{});
  CHECK_THROWS_AS(buf.add(0, Transition{}), LifecycleError);
  CHECK_THROWS_AS(buf.add(2, Transition{}), BatchError);
  CHECK(buf.size() == 2);
  CHECK_THROWS_AS(buf.finish({0.0}), BatchError);

  auto ac = make_policy(ActionKind::discrete, 3, 1);
  Adam<float> opt(ac.params.size());
  Rng rng = Rng::stream(1, "shuffle");
  RolloutBuffer open(1, 4);
  CHECK_THROWS_AS(ppo_update(ac, opt, open, PpoConfig{}, LrSchedule{}, 0, rng), LifecycleError);

  buf.finish({0.0, 0.0});
  CHECK_THROWS_AS(buf.add(1, Transition{}), LifecycleError);
  buf.clear();
  CHECK(buf.size() == 0);
  CHECK_FALSE(buf.full());
}

TEST_CASE("update runs every minibatch including the partial last one") {
  auto ac = make_policy(ActionKind::discrete, 5, 2);
  Adam<float> opt(ac.params.size());
  auto buf = random_buffer(2, 5, 5, ActionKind::discrete, 3);
  PpoConfig cfg;
  cfg.epochs = 2;
  cfg.minibatch_size = 4;
  Rng rng = Rng::stream(1, "shuffle");
  const auto s = ppo_update(ac, opt, buf, cfg, LrSchedule{}, 0, rng);
  CHECK(s.minibatches == 6);
  CHECK(s.samples == 10);
  CHECK(opt.t == 6);
}

TEST_CASE("identical updates are bit-identical") {
  for (ActionKind kind : {ActionKind::continuous, ActionKind::discrete}) {
    auto a = make_policy(kind, 6, 5), b = make_policy(kind, 6, 5);
    Adam<float> oa(a.params.size()), ob(b.params.size());
    auto ba = random_buffer(3, 40, 6, kind, 7), bb = random_buffer(3, 40, 6, kind, 7);
    PpoConfig cfg;
    cfg.minibatch_size = 32;
    Rng ra = Rng::stream(2, "shuffle"), rb = Rng::stream(2, "shuffle");
    ppo_update(a, oa, ba, cfg, LrSchedule{}, 100, ra);
    ppo_update(b, ob, bb, cfg, LrSchedule{}, 100, rb);
    CHECK(a.params.flat() == b.params.flat());
    CHECK(oa.v == ob.v);
  }
}

TEST_CASE("zero advantages move the policy head only through entropy") {
  auto ac = make_policy(ActionKind::continuous, 6, 9);
  auto buf = random_buffer(1, 64, 6, ActionKind::continuous, 10);
  for (auto& t : buf.sequence(0)) {
    t.reward = 0;
    t.value = 0;
    t.terminal = true;
    t.episode_end = true;
  }
  PpoConfig cfg;
  cfg.epochs = 1;
  cfg.minibatch_size = 64;
  cfg.entropy_coef = 0.0;
  LrSchedule sched{1e-3, 1e7, LrSchedule::Mode::constant};
  const ParamSet<float> before = ac.params;
  Adam<float> opt(ac.params.size());
  Rng rng = Rng::stream(1, "shuffle");
  ppo_update(ac, opt, buf, cfg, sched, 0, rng);
  const auto& ts = ac.params.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i].name.rfind("policy.", 0) == 0 || ts[i].name == "log_std")
      CHECK(MatT<float>(ac.params[static_cast<int>(i)]) == MatT<float>(before[static_cast<int>(i)]));
  }

  auto ac2 = make_policy(ActionKind::continuous, 6, 9);
  cfg.entropy_coef = 0.1;
  Adam<float> opt2(ac2.params.size());
  Rng rng2 = Rng::stream(1, "shuffle");
  ppo_update(ac2, opt2, buf, cfg, sched, 0, rng2);
  CHECK((ac2.log_std().array() > before[before.find("log_std")].col(0).array()).all());
}

TEST_CASE("larger entropy coefficient leaves a higher-entropy policy") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    double h[2];
    for (int k = 0; k < 2; ++k) {
      auto ac = make_policy(ActionKind::discrete, 2, seed);
      ac.params[ac.params.find("policy.0.w")] *= 100.0f;
      auto buf = bandit_buffer(ac, 128, seed);
      for (auto& t : buf.sequence(0)) t.reward = 0.5;  // uniform advantage
      PpoConfig cfg;
      cfg.minibatch_size = 64;
      cfg.entropy_coef = k == 0 ? 0.01 : 0.1;
      Adam<float> opt(ac.params.size());
      Rng rng = Rng::stream(seed, "shuffle");
      ppo_update(ac, opt, buf, cfg, LrSchedule{1e-3, 1e7, LrSchedule::Mode::constant}, 0, rng);
      h[k] = entropy_on(ac, buf.sequence(0)[0].obs);
    }
    CHECK(h[1] > h[0]);
  }
}

TEST_CASE("trust region sanity on a toy bandit") {
  for (double lr : {3e-4, 1e-3}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      auto ac = make_policy(ActionKind::discrete, 2, seed, 32);
      auto buf = bandit_buffer(ac, 256, seed + 100);
      PpoConfig cfg;
      cfg.minibatch_size = 64;
      Adam<float> opt(ac.params.size());
      Rng rng = Rng::stream(seed, "shuffle");
      ppo_update(ac, opt, buf, cfg, LrSchedule{lr, 1e7, LrSchedule::Mode::constant}, 0, rng);
      const auto& seq = buf.sequence(0);
      MatT<float> obs(2, static_cast<Eigen::Index>(seq.size())), act(1, static_cast<Eigen::Index>(seq.size()));
      for (std::size_t j = 0; j < seq.size(); ++j) {
        obs.col(static_cast<Eigen::Index>(j)) = seq[j].obs;
        act(0, static_cast<Eigen::Index>(j)) = seq[j].action[0];
      }
      VecT<float> lp, ent;
      evaluate_actions<float>(ac, ac.params, obs, act, lp, ent);
      int inside = 0;
      for (std::size_t j = 0; j < seq.size(); ++j) {
        const double mu = std::exp(static_cast<double>(lp[static_cast<Eigen::Index>(j)] - seq[j].log_prob));
        if (mu >= 1 - 2 * cfg.epsilon && mu <= 1 + 2 * cfg.epsilon) ++inside;
      }
      CHECK(inside >= static_cast<int>(0.95 * static_cast<double>(seq.size())));
      // And the rewarded arm did become more likely.
      VecT<float> lp3, e3;
      evaluate_actions<float>(ac, ac.params, obs.leftCols(1), MatT<float>::Constant(1, 1, 3.0f), lp3, e3);
      CHECK(std::exp(lp3[0]) > 0.125f);
    }
  }
}

TEST_CASE("zero curiosity strength reproduces plain PPO bit for bit") {
  for (ActionKind kind : {ActionKind::continuous, ActionKind::discrete}) {
    const int ad = kind == ActionKind::continuous ? 4 : 8;
    auto plain = make_policy(kind, 6, 21), cur = make_policy(kind, 6, 21);
    Adam<float> op(plain.params.size()), oc(cur.params.size());
    Icm<float> icm(6, kind, ad, 8, 16);
    Rng irng = Rng::stream(3, "icm");
    icm.init(irng);
    Adam<float> oi(icm.params.size());
    IcmLearner learner{&icm, &oi, IcmConfig{}};
    learner.config.strength = 0.0;
    const ParamSet<float> icm_before = icm.params;
    PpoConfig cfg;
    cfg.minibatch_size = 50;
    for (int round = 0; round < 3; ++round) {
      auto b1 = random_buffer(2, 60, 6, kind, 30 + static_cast<std::uint64_t>(round));
      auto b2 = random_buffer(2, 60, 6, kind, 30 + static_cast<std::uint64_t>(round));
      Rng r1 = Rng::stream(static_cast<std::uint64_t>(round), "shuffle");
      Rng r2 = Rng::stream(static_cast<std::uint64_t>(round), "shuffle");
      ppo_update(plain, op, b1, cfg, LrSchedule{}, 1000.0 * round, r1);
      const auto s = ppo_update(cur, oc, b2, cfg, LrSchedule{}, 1000.0 * round, r2, &learner);
      CHECK(s.intrinsic_mean == 0.0);
      CHECK(s.forward_loss > 0.0);
    }
    CHECK(plain.params.flat() == cur.params.flat());
    // The curiosity networks still trained.
    CHECK(icm.params.flat() != icm_before.flat());
  }
}

TEST_CASE("intrinsic reward") {
  IcmConfig c;
  CHECK(intrinsic_reward(c, 0.0) == 0.0);
  CHECK(intrinsic_reward(c, 4.0) == doctest::Approx(0.08).epsilon(1e-15));
  CHECK_THROWS_AS(intrinsic_reward(c, -1e-9), NumericError);
  CHECK_THROWS_AS(intrinsic_reward(c, NAN), NumericError);
  c.strength = -1;
  CHECK_THROWS_AS(validate(c, "uav"), ConfigError);
}

TEST_CASE("icm shapes and trivial losses") {
  Icm<double> uav(68, ActionKind::continuous, 4);
  Icm<double> ugv(33, ActionKind::discrete, 8);
  CHECK(uav.encode(MatT<double>::Random(68, 3)).rows() == 128);
  CHECK(ugv.encode(MatT<double>::Random(33, 3)).rows() == 128);
  CHECK(ugv.encode(MatT<double>::Random(33, 3)).norm() == 0.0);  // zero weights

  // Zero inverse model predicts uniform: cross-entropy ln 8.
  MatT<double> acts(1, 4);
  acts << 0, 3, 5, 7;
  const auto l = ugv.loss(ugv.params, MatT<double>::Random(33, 4), MatT<double>::Random(33, 4), acts, 0.2);
  CHECK(l.inverse == doctest::Approx(std::log(8.0)).epsilon(1e-15));
  CHECK(l.forward == 0.0);
  CHECK_THROWS_AS(ugv.encode(MatT<double>::Random(34, 1)), ShapeError);
  MatT<double> bad(1, 1);
  bad << 8;
  CHECK_THROWS_AS(ugv.action_features(bad), ShapeError);
}

TEST_CASE("icm forward loss matches an elementwise loop") {
  Icm<double> icm(7, ActionKind::continuous, 4, 5, 9);
  Rng rng = Rng::stream(6, "icmloop");
  icm.init(rng);
  const MatT<double> s = MatT<double>::Random(7, 6), s2 = MatT<double>::Random(7, 6), a = MatT<double>::Random(4, 6);
  const auto l = icm.loss(icm.params, s, s2, a, 0.2);
  const MatT<double> phi_hat = icm.predict_next(icm.params, icm.encode(s), a);
  const MatT<double> phi_next = icm.encode(s2);
  double mean = 0.0;
  for (int b = 0; b < 6; ++b) {
    double e = 0.0;
    for (int i = 0; i < 5; ++i) e += (phi_hat(i, b) - phi_next(i, b)) * (phi_hat(i, b) - phi_next(i, b));
    CHECK(std::abs(0.5 * e - l.forward_per_sample[b]) <= 1e-12);
    mean += 0.5 * e / 6.0;
  }
  CHECK(std::abs(mean - l.forward) <= 1e-12);
  CHECK((icm.forward_errors(s, s2, a) - l.forward_per_sample).norm() <= 1e-12);

  // Continuous inverse loss: perfect prediction is zero.
  const MatT<double> a_hat = icm.predict_action(icm.params, icm.encode(s), phi_next);
  CHECK(icm.loss(icm.params, s, s2, a_hat, 0.2).inverse <= 1e-24);
}

TEST_CASE("forward loss sends no gradient into the encoder") {
  Icm<double> icm(6, ActionKind::discrete, 8, 5, 7);
  Rng rng = Rng::stream(12, "icmgrad");
  icm.init(rng);
  const MatT<double> s = MatT<double>::Random(6, 5), s2 = MatT<double>::Random(6, 5);
  MatT<double> a(1, 5);
  a << 1, 2, 3, 4, 5;
  ParamSet<double> g1 = icm.params.zeros_like(), g2 = icm.params.zeros_like();
  icm.loss(icm.params, s, s2, a, 0.2, &g1);
  icm.loss(icm.params, s, s2, a, 0.6, &g2);
  for (std::size_t i = 0; i < g1.tensors().size(); ++i) {
    const auto& name = g1.tensors()[i].name;
    const int id = static_cast<int>(i);
    if (name.rfind("icm.encoder", 0) == 0) {
      // Encoder gradient is all inverse-loss: it scales with (1 - beta).
      CHECK((MatT<double>(g1[id]) / 0.8 - MatT<double>(g2[id]) / 0.4).norm() <=
            1e-12 * (1.0 + MatT<double>(g1[id]).norm()));
    }
  }
}

namespace {

struct OverfitBatch {
  MatT<float> s, s2, a;
};

OverfitBatch overfit_batch() {
  Rng rng = Rng::stream(5, "overfit-batch");
  const int n = 32;
  OverfitBatch b{MatT<float>(6, n), MatT<float>(6, n), MatT<float>(1, n)};
  for (int j = 0; j < n; ++j) {
    const int id = j % 8;
    for (int i = 0; i < 6; ++i) b.s(i, j) = static_cast<float>(rng.normal());
    b.s2.col(j) = b.s.col(j);
    b.s2(id % 6, j) += id < 6 ? 1.0f : -1.0f;
    b.s2(5, j) += 0.25f * static_cast<float>(id);
    b.a(0, j) = static_cast<float>(id);
  }
  return b;
}

}  // namespace

TEST_CASE("forward model regresses a fixed batch monotonically") {
  // With the encoder held still the forward target is stationary.
  Icm<float> icm(6, ActionKind::discrete, 8, 32, 64);
  Rng rng = Rng::stream(5, "overfit");
  icm.init(rng);
  const auto b = overfit_batch();
  Adam<float> opt(icm.params.size());
  double prev = 1e300;
  for (int step = 0; step <= 50; ++step) {
    ParamSet<float> g = icm.params.zeros_like();
    const auto l = icm.loss(icm.params, b.s, b.s2, b.a, 0.2, &g);
    REQUIRE(l.forward < prev);
    prev = l.forward;
    for (std::size_t t = 0; t < g.tensors().size(); ++t)
      if (g.tensors()[t].name.rfind("icm.encoder", 0) == 0) g[static_cast<int>(t)].setZero();
    opt.step(icm.params.flat(), g.flat(), 1e-3);
  }
}

TEST_CASE("joint icm updates drive the inverse loss down") {
  Icm<float> icm(6, ActionKind::discrete, 8, 32, 64);
  Rng rng = Rng::stream(5, "overfit");
  icm.init(rng);
  const auto b = overfit_batch();
  Adam<float> opt(icm.params.size());
  int first_below = -1;
  double peak_forward = 0, last_forward = 0;
  for (int step = 0; step < 400; ++step) {
    ParamSet<float> g = icm.params.zeros_like();
    const auto l = icm.loss(icm.params, b.s, b.s2, b.a, 0.2, &g);
    if (first_below < 0 && l.inverse < std::log(8.0) / 2) first_below = step;
    peak_forward = std::max(peak_forward, l.forward);
    last_forward = l.forward;
    opt.step(icm.params.flat(), g.flat(), 1e-3);
  }
  CHECK(first_below >= 0);
  CHECK(first_below < 200);
  // The encoder's feature scale moves the forward target, so L_F rises before
  // the forward model catches up.
  CHECK(last_forward < 0.5 * peak_forward);
}
