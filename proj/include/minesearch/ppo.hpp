#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "minesearch/icm.hpp"
#include "minesearch/nn.hpp"

namespace minesearch {

struct PpoConfig {
  double epsilon = 0.2;
  double entropy_coef = 0.03;     // beta, decayed linearly with the learning rate
  double gamma = 0.99;            // extrinsic discount
  double lambda = 0.95;
  double extrinsic_strength = 1.0;
  int epochs = 3;
  int minibatch_size = 1024;
  int horizon = 512;
  double value_coef = 0.5;
  // The value head predicts returns divided by this constant.
  double value_scale = 1000.0;
  bool normalize_advantages = true;
};

void validate(const PpoConfig& c, const char* agent);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// delta_t = r_t + gamma * v_{t+1} * (1 - done_t) - v_t, with v_n = bootstrap;
// A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}.
GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<bool>& dones, double bootstrap_value, double gamma, double lambda);

// General form: next_values[t] is the value to bootstrap from after step t
// (0 for true terminals, V(final obs) for truncations); episode_end cuts the
// lambda recursion.
GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<double>& next_values, const std::vector<bool>& episode_end, double gamma,
                      double lambda);

double clip_ratio(double ratio, double epsilon);

// In place: mean 0 and, unless the spread is negligible, std 1.
void normalize_advantages(std::vector<double>& a);

struct PpoObjective {
  double loss = 0;          // -(surrogate + c * entropy) + value_coef * value_loss
  double surrogate = 0;     // mean of min(mu * A, clip(mu) * A)
  double clip_fraction = 0;
  double mean_ratio = 0;
};

PpoObjective ppo_objective(const std::vector<double>& log_prob_new, const std::vector<double>& log_prob_old,
                           const std::vector<double>& advantages, double entropy, double value_loss,
                           double entropy_coef, const PpoConfig& config);

// Minibatch in network precision. Discrete actions are a 1 x B row of 0-based ids.
template <typename T>
struct PolicyBatch {
  MatT<T> obs;
  MatT<T> actions;
  VecT<T> log_prob_old;
  VecT<T> advantages;
  VecT<T> value_targets;  // network units
};

struct LossStats {
  double loss = 0;
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double clip_fraction = 0;
  double mean_ratio = 0;
};

// PPO loss on one minibatch; accumulates gradients into `grads` when given.
template <typename T>
LossStats ppo_loss(const ActorCritic<T>& net, const ParamSet<T>& ps, const PolicyBatch<T>& batch,
                   const PpoConfig& config, double entropy_coef, ParamSet<T>* grads = nullptr);

// Log-probabilities and per-sample entropies of `actions` under `ps`.
template <typename T>
void evaluate_actions(const ActorCritic<T>& net, const ParamSet<T>& ps, const MatT<T>& obs, const MatT<T>& actions,
                      VecT<T>& log_prob, VecT<T>& entropy);

struct Transition {
  Eigen::VectorXf obs;
  Eigen::VectorXf next_obs;  // observation the action led to (pre-reset)
  Eigen::VectorXf action;    // continuous sample (pre-clamp) or a single 0-based id
  Eigen::VectorXf executed;  // action as applied (clamped); feeds the ICM
  float log_prob = 0;
  double value = 0;          // reward units
  double next_value = 0;     // bootstrap used when the episode ends without a terminal
  double reward = 0;
  double intrinsic = 0;
  bool terminal = false;
  bool episode_end = false;
};

// Per-instance transition sequences for one agent.
class RolloutBuffer {
 public:
  RolloutBuffer() = default;
  RolloutBuffer(int num_instances, int horizon);

  void add(int instance, Transition t);
  // Closes collection; `bootstrap[i]` is V(last obs) of instance i (reward units).
  void finish(const std::vector<double>& bootstrap);
  void clear();

  bool full() const { return finished_; }
  std::size_t size() const;
  int num_instances() const { return static_cast<int>(seqs_.size()); }
  int horizon() const { return horizon_; }
  std::vector<Transition>& sequence(int i) { return seqs_[static_cast<std::size_t>(i)]; }
  const std::vector<Transition>& sequence(int i) const { return seqs_[static_cast<std::size_t>(i)]; }
  double bootstrap(int i) const { return bootstrap_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<std::vector<Transition>> seqs_;
  std::vector<double> bootstrap_;
  int horizon_ = 0;
  bool finished_ = false;
};

struct UpdateStats {
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double clip_fraction = 0;
  double mean_ratio = 0;
  double intrinsic_mean = 0;
  double forward_loss = 0;
  double inverse_loss = 0;
  int minibatches = 0;
  std::size_t samples = 0;
};

// Optional curiosity learner attached to a policy.
struct IcmLearner {
  Icm<float>* net = nullptr;
  Adam<float>* opt = nullptr;
  IcmConfig config;
};

// Fills intrinsic rewards, computes two-stream advantages and runs the
// clipped PPO epochs (plus one ICM step per minibatch when attached).
UpdateStats ppo_update(ActorCritic<float>& net, Adam<float>& opt, RolloutBuffer& buffer, const PpoConfig& config,
                       const LrSchedule& schedule, double step, Rng& shuffle_rng, IcmLearner* icm = nullptr);

// Advantages and value targets exactly as ppo_update forms them.
void advantage_targets(const RolloutBuffer& buffer, const PpoConfig& config, double curiosity_gamma,
                       std::vector<double>& advantages, std::vector<double>& returns);

}  // namespace minesearch
