#include "minesearch/agents.hpp"

#include <cmath>
#include <numbers>

#include "minesearch/errors.hpp"

namespace minesearch {

const char* to_string(Agent a) { return a == Agent::uav ? "uav" : "ugv"; }

int obs_dim(Agent a) { return a == Agent::uav ? kUavObsDim : kUgvObsDim; }
int action_dim(Agent a) { return a == Agent::uav ? kUavActionDim : kUgvActionCount; }
ActionKind action_kind(Agent a) { return a == Agent::uav ? ActionKind::continuous : ActionKind::discrete; }

Eigen::VectorXf observation_scale(Agent a) {
  Eigen::VectorXf s = Eigen::VectorXf::Ones(obs_dim(a));
  const float inv_pi = static_cast<float>(1.0 / std::numbers::pi);
  if (a == Agent::uav) {
    s.segment(uav_obs::position, 2).setConstant(0.05f);
    s[uav_obs::position + 2] = 0.5f;
  } else {
    s.segment(ugv_obs::rel_uav, 2).setConstant(0.1f);
    s[ugv_obs::rel_angle] = inv_pi;
    s.segment(ugv_obs::position, 2).setConstant(0.05f);
    s[ugv_obs::heading] = inv_pi;
  }
  return s;
}

ActorCritic<float> make_policy(Agent a, int hidden) {
  ActorCritic<float> net(obs_dim(a), action_kind(a), action_dim(a), hidden);
  net.input_scale = observation_scale(a);
  return net;
}

Icm<float> make_icm(Agent a, const IcmConfig& c) {
  Icm<float> icm(obs_dim(a), action_kind(a), action_dim(a), c.feature_dim, c.hidden);
  icm.input_scale = observation_scale(a);
  return icm;
}

Eigen::MatrixXf stack(const std::vector<ObsVec>& obs) {
  if (obs.empty()) return {};
  Eigen::MatrixXf m(obs[0].size(), static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs[i].size() != m.rows()) throw ShapeError("observations in a batch differ in length");
    m.col(static_cast<Eigen::Index>(i)) = obs[i].cast<float>();
  }
  return m;
}

namespace {

ActionBatch choose(const ActorCritic<float>& net, const Eigen::MatrixXf& obs, Rng* shared,
                   const std::vector<Rng*>* per_column) {
  const auto out = net.forward(obs);
  const Eigen::Index n = obs.cols();
  ActionBatch b;
  b.value = out.value.transpose();
  b.log_prob.resize(n);
  if (net.kind() == ActionKind::continuous) {
    const Eigen::VectorXf ls = net.log_std();
    const Eigen::VectorXf sigma = ls.array().exp();
    b.action.resize(out.head.rows(), n);
    for (Eigen::Index j = 0; j < n; ++j) {
      Rng* rng = per_column ? (*per_column)[static_cast<std::size_t>(j)] : shared;
      for (Eigen::Index r = 0; r < out.head.rows(); ++r) {
        const float noise = rng ? static_cast<float>(rng->normal()) : 0.0f;
        b.action(r, j) = out.head(r, j) + sigma[r] * noise;
      }
      b.log_prob[j] = gaussian_log_prob<float>(out.head.col(j), ls, b.action.col(j));
    }
    b.executed = b.action.cwiseMax(-1.0f).cwiseMin(1.0f);
  } else {
    b.action.resize(1, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::VectorXf lsm = log_softmax<float>(out.head.col(j));
      Rng* rng = per_column ? (*per_column)[static_cast<std::size_t>(j)] : shared;
      Eigen::Index pick = 0;
      if (rng) {
        double u = rng->uniform();
        for (pick = 0; pick + 1 < lsm.size(); ++pick) {
          u -= std::exp(static_cast<double>(lsm[pick]));
          if (u < 0) break;
        }
      } else {
        for (Eigen::Index k = 1; k < lsm.size(); ++k)
          if (lsm[k] > lsm[pick]) pick = k;
      }
      b.action(0, j) = static_cast<float>(pick);
      b.log_prob[j] = lsm[pick];
    }
    b.executed = b.action;
  }
  return b;
}

}  // namespace

ActionBatch sample_actions(const ActorCritic<float>& net, const Eigen::MatrixXf& obs, Rng& rng) {
  return choose(net, obs, &rng, nullptr);
}

ActionBatch sample_actions(const ActorCritic<float>& net, const Eigen::MatrixXf& obs, std::vector<Rng*>& rngs) {
  if (rngs.size() != static_cast<std::size_t>(obs.cols())) throw BatchError("one generator per column is required");
  return choose(net, obs, nullptr, &rngs);
}

ActionBatch greedy_actions(const ActorCritic<float>& net, const Eigen::MatrixXf& obs) {
  return choose(net, obs, nullptr, nullptr);
}

UavCommand to_command(const Eigen::VectorXf& executed) {
  if (executed.size() != kUavActionDim) throw ShapeError("UAV command needs 4 components");
  UavCommand c;
  c.a = executed.cast<double>();
  return c;
}

int to_ugv_action(float id) {
  const int k = static_cast<int>(id);
  if (k < 0 || k >= kUgvActionCount || static_cast<float>(k) != id) throw ActionError("UGV policy id out of range");
  return k + 1;
}

}  // namespace minesearch
