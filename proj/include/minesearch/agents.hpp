#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "minesearch/env.hpp"
#include "minesearch/icm.hpp"
#include "minesearch/nn.hpp"

namespace minesearch {

enum class Agent { uav, ugv };
const char* to_string(Agent a);

int obs_dim(Agent a);
int action_dim(Agent a);
ActionKind action_kind(Agent a);

// Per-feature multipliers that bring positions and angles to order one.
Eigen::VectorXf observation_scale(Agent a);

ActorCritic<float> make_policy(Agent a, int hidden = 256);
Icm<float> make_icm(Agent a, const IcmConfig& c);

// Observations of a batch, one column per instance.
Eigen::MatrixXf stack(const std::vector<ObsVec>& obs);

struct ActionBatch {
  Eigen::MatrixXf action;    // raw sample (continuous) or 1 x B ids, 0-based
  Eigen::MatrixXf executed;  // clamped command, or the same ids
  Eigen::VectorXf log_prob;
  Eigen::VectorXf value;     // network units
};

// Samples from the policy, drawing from `rng` in column order.
ActionBatch sample_actions(const ActorCritic<float>& net, const Eigen::MatrixXf& obs, Rng& rng);
// Column j draws from rngs[j].
ActionBatch sample_actions(const ActorCritic<float>& net, const Eigen::MatrixXf& obs, std::vector<Rng*>& rngs);
// Distribution mode: Gaussian mean, or the first maximal logit.
ActionBatch greedy_actions(const ActorCritic<float>& net, const Eigen::MatrixXf& obs);

UavCommand to_command(const Eigen::VectorXf& executed);
// Network ids are 0-based; environment actions are 1..8.
int to_ugv_action(float id);

}  // namespace minesearch
