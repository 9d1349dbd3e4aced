#include "minesearch/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "minesearch/errors.hpp"

namespace minesearch {

void validate(const PpoConfig& c, const char* agent) {
  const std::string a(agent);
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) throw ConfigError(a + ".epsilon must lie in (0, 1)");
  if (!(c.gamma > 0.0 && c.gamma <= 1.0)) throw ConfigError(a + ".extrinsic_gamma must lie in (0, 1]");
  if (!(c.lambda > 0.0 && c.lambda <= 1.0)) throw ConfigError(a + ".lambd must lie in (0, 1]");
  if (!(c.entropy_coef >= 0.0)) throw ConfigError(a + ".beta must be >= 0");
  if (!(c.extrinsic_strength >= 0.0)) throw ConfigError(a + ".extrinsic_strength must be >= 0");
  if (c.epochs < 1) throw ConfigError(a + ".num_epoch must be >= 1");
  if (c.minibatch_size < 1) throw ConfigError(a + ".batch_size must be >= 1");
  if (c.horizon < 1) throw ConfigError(a + ".time_horizon must be >= 1");
  if (!(c.value_coef >= 0.0)) throw ConfigError(a + ".value_coef must be >= 0");
  if (!(c.value_scale > 0.0)) throw ConfigError(a + ".value_scale must be > 0");
}

GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<bool>& dones, double bootstrap_value, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw ShapeError("GAE: rewards, values and dones differ in length");
  std::vector<double> next(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double v = t + 1 < n ? values[t + 1] : bootstrap_value;
    next[t] = dones[t] ? 0.0 : v;
  }
  return compute_gae(rewards, values, next, dones, gamma, lambda);
}

GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<double>& next_values, const std::vector<bool>& episode_end, double gamma,
                      double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || next_values.size() != n || episode_end.size() != n)
    throw ShapeError("GAE: input lengths differ");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double delta = rewards[k] + gamma * next_values[k] - values[k];
    const double carry = episode_end[k] ? 0.0 : gamma * lambda * next_adv;
    out.advantages[k] = delta + carry;
    out.returns[k] = out.advantages[k] + values[k];
    next_adv = out.advantages[k];
  }
  return out;
}

double clip_ratio(double ratio, double epsilon) { return std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon); }

void normalize_advantages(std::vector<double>& a) {
  if (a.empty()) return;
  const double n = static_cast<double>(a.size());
  double mean = 0.0;
  for (double v : a) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : a) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  for (double& v : a) v = sd > 1e-8 ? (v - mean) / sd : v - mean;
}

PpoObjective ppo_objective(const std::vector<double>& log_prob_new, const std::vector<double>& log_prob_old,
                           const std::vector<double>& advantages, double entropy, double value_loss,
                           double entropy_coef, const PpoConfig& config) {
  const std::size_t n = log_prob_new.size();
  if (log_prob_old.size() != n || advantages.size() != n || n == 0)
    throw ShapeError("PPO objective: batch arrays differ in length or are empty");
  PpoObjective out;
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(log_prob_new[i]) || !std::isfinite(log_prob_old[i]))
      throw NumericError("PPO objective: non-finite log-probability at sample " + std::to_string(i));
    const double mu = std::exp(log_prob_new[i] - log_prob_old[i]);
    const double a = advantages[i];
    out.surrogate += std::min(mu * a, clip_ratio(mu, config.epsilon) * a);
    out.mean_ratio += mu;
    if (std::abs(mu - 1.0) > config.epsilon) ++clipped;
  }
  const double inv = 1.0 / static_cast<double>(n);
  out.surrogate *= inv;
  out.mean_ratio *= inv;
  out.clip_fraction = static_cast<double>(clipped) * inv;
  out.loss = -(out.surrogate + entropy_coef * entropy) + config.value_coef * value_loss;
  return out;
}

template <typename T>
void evaluate_actions(const ActorCritic<T>& net, const ParamSet<T>& ps, const MatT<T>& obs, const MatT<T>& actions,
                      VecT<T>& log_prob, VecT<T>& entropy) {
  const auto out = net.forward(ps, obs);
  const Eigen::Index n = obs.cols();
  log_prob.resize(n);
  entropy.resize(n);
  if (net.kind() == ActionKind::continuous) {
    const VecT<T> ls = net.log_std(ps);
    const T h = gaussian_entropy<T>(ls);
    for (Eigen::Index b = 0; b < n; ++b) {
      log_prob[b] = gaussian_log_prob<T>(out.head.col(b), ls, actions.col(b));
      entropy[b] = h;
    }
  } else {
    for (Eigen::Index b = 0; b < n; ++b) {
      const VecT<T> lsm = log_softmax<T>(out.head.col(b));
      log_prob[b] = lsm[static_cast<Eigen::Index>(actions(0, b))];
      entropy[b] = -(lsm.array().exp() * lsm.array()).sum();
    }
  }
}

template <typename T>
LossStats ppo_loss(const ActorCritic<T>& net, const ParamSet<T>& ps, const PolicyBatch<T>& batch,
                   const PpoConfig& config, double entropy_coef, ParamSet<T>* grads) {
  const Eigen::Index n = batch.obs.cols();
  if (n == 0 || batch.actions.cols() != n || batch.log_prob_old.size() != n || batch.advantages.size() != n ||
      batch.value_targets.size() != n)
    throw ShapeError("PPO batch arrays differ in length or are empty");
  typename ActorCritic<T>::Cache cache;
  const auto out = net.forward(ps, batch.obs, grads ? &cache : nullptr);
  const bool continuous = net.kind() == ActionKind::continuous;
  const T inv_n = T(1) / static_cast<T>(n);
  const T c = static_cast<T>(entropy_coef);
  const T eps = static_cast<T>(config.epsilon);

  MatT<T> d_head = MatT<T>::Zero(out.head.rows(), n);
  RowT<T> d_value(n);
  VecT<T> d_log_std;
  VecT<T> ls;
  if (continuous) {
    ls = net.log_std(ps);
    d_log_std = VecT<T>::Zero(ls.size());
  }

  LossStats s;
  double surrogate = 0.0;
  double entropy = 0.0;
  double value_loss = 0.0;
  double ratio_sum = 0.0;
  std::size_t clipped = 0;
  for (Eigen::Index b = 0; b < n; ++b) {
    T lp = 0;
    T h = 0;
    VecT<T> lsm;
    if (continuous) {
      lp = gaussian_log_prob<T>(out.head.col(b), ls, batch.actions.col(b));
      h = gaussian_entropy<T>(ls);
    } else {
      lsm = log_softmax<T>(out.head.col(b));
      lp = lsm[static_cast<Eigen::Index>(batch.actions(0, b))];
      h = -(lsm.array().exp() * lsm.array()).sum();
    }
    if (!std::isfinite(static_cast<double>(lp))) throw NumericError("PPO loss: non-finite log-probability");
    const T ratio = std::exp(lp - batch.log_prob_old[b]);
    const T adv = batch.advantages[b];
    const T unclipped = ratio * adv;
    const T clipped_term = std::clamp(ratio, T(1) - eps, T(1) + eps) * adv;
    surrogate += static_cast<double>(std::min(unclipped, clipped_term));
    entropy += static_cast<double>(h);
    ratio_sum += static_cast<double>(ratio);
    if (std::abs(ratio - T(1)) > eps) ++clipped;
    const T v_err = out.value(b) - batch.value_targets[b];
    value_loss += static_cast<double>(v_err * v_err);

    if (!grads) continue;
    // d(-surrogate)/d(log pi): the unclipped branch is the only one with slope.
    const T d_lp = unclipped <= clipped_term ? -ratio * adv * inv_n : T(0);
    d_value(b) = static_cast<T>(config.value_coef) * T(2) * v_err * inv_n;
    if (continuous) {
      const VecT<T> sigma = ls.array().exp();
      const VecT<T> z = (batch.actions.col(b) - out.head.col(b)).array() / sigma.array();
      d_head.col(b) = d_lp * (z.array() / sigma.array()).matrix();
      d_log_std += d_lp * (z.array().square() - T(1)).matrix();
      d_log_std.array() -= c * inv_n;  // dH/dlog_std = 1 per dimension
    } else {
      const VecT<T> p = lsm.array().exp();
      VecT<T> g = -d_lp * p;
      g[static_cast<Eigen::Index>(batch.actions(0, b))] += d_lp;
      // dH/dlogit_j = -p_j (log p_j + H)
      g.array() += c * inv_n * p.array() * (lsm.array() + h);
      d_head.col(b) = g;
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  s.policy_loss = -surrogate * inv;
  s.entropy = entropy * inv;
  s.value_loss = value_loss * inv;
  s.clip_fraction = static_cast<double>(clipped) * inv;
  s.mean_ratio = ratio_sum * inv;
  s.loss = s.policy_loss - entropy_coef * s.entropy + config.value_coef * s.value_loss;
  if (grads) net.backward(ps, cache, d_head, d_value, d_log_std, *grads);
  return s;
}

RolloutBuffer::RolloutBuffer(int num_instances, int horizon)
    : seqs_(static_cast<std::size_t>(num_instances)),
      bootstrap_(static_cast<std::size_t>(num_instances), 0.0),
      horizon_(horizon) {
  for (auto& s : seqs_) s.reserve(static_cast<std::size_t>(horizon));
}

void RolloutBuffer::add(int instance, Transition t) {
  if (finished_) throw LifecycleError("rollout buffer is closed; clear it before collecting");
  if (instance < 0 || instance >= num_instances()) throw BatchError("rollout buffer instance out of range");
  auto& seq = seqs_[static_cast<std::size_t>(instance)];
  if (static_cast<int>(seq.size()) >= horizon_) throw LifecycleError("rollout buffer sequence is at capacity");
  seq.push_back(std::move(t));
}

void RolloutBuffer::finish(const std::vector<double>& bootstrap) {
  if (bootstrap.size() != seqs_.size()) throw BatchError("one bootstrap value per instance is required");
  bootstrap_ = bootstrap;
  finished_ = true;
}

void RolloutBuffer::clear() {
  for (auto& s : seqs_) s.clear();
  std::fill(bootstrap_.begin(), bootstrap_.end(), 0.0);
  finished_ = false;
}

std::size_t RolloutBuffer::size() const {
  std::size_t n = 0;
  for (const auto& s : seqs_) n += s.size();
  return n;
}

void advantage_targets(const RolloutBuffer& buffer, const PpoConfig& config, double curiosity_gamma,
                       std::vector<double>& advantages, std::vector<double>& returns) {
  advantages.clear();
  returns.clear();
  for (int i = 0; i < buffer.num_instances(); ++i) {
    const auto& seq = buffer.sequence(i);
    const std::size_t n = seq.size();
    if (n == 0) continue;
    std::vector<double> r(n), v(n), nv(n), ri(n), zero(n, 0.0), nzero(n, 0.0);
    std::vector<bool> end(n);
    for (std::size_t t = 0; t < n; ++t) {
      const Transition& tr = seq[t];
      r[t] = tr.reward;
      ri[t] = tr.intrinsic;
      v[t] = tr.value;
      const bool last = t + 1 == n;
      if (tr.terminal) {
        nv[t] = 0.0;
      } else if (tr.episode_end) {
        nv[t] = tr.next_value;
      } else {
        nv[t] = last ? buffer.bootstrap(i) : seq[t + 1].value;
      }
      end[t] = tr.terminal || tr.episode_end || last;
    }
    const GaeResult ext = compute_gae(r, v, nv, end, config.gamma, config.lambda);
    const GaeResult in = compute_gae(ri, zero, nzero, end, curiosity_gamma, config.lambda);
    for (std::size_t t = 0; t < n; ++t) {
      advantages.push_back(config.extrinsic_strength * ext.advantages[t] + in.advantages[t]);
      returns.push_back(ext.returns[t]);
    }
  }
}

namespace {

void fill_intrinsic(RolloutBuffer& buffer, const IcmLearner& icm) {
  for (int i = 0; i < buffer.num_instances(); ++i) {
    auto& seq = buffer.sequence(i);
    if (seq.empty()) continue;
    const Eigen::Index n = static_cast<Eigen::Index>(seq.size());
    const Eigen::Index od = seq[0].obs.size();
    const Eigen::Index ad = seq[0].executed.size();
    Eigen::MatrixXf obs(od, n), next(od, n), act(ad, n);
    for (Eigen::Index t = 0; t < n; ++t) {
      obs.col(t) = seq[static_cast<std::size_t>(t)].obs;
      next.col(t) = seq[static_cast<std::size_t>(t)].next_obs;
      act.col(t) = seq[static_cast<std::size_t>(t)].executed;
    }
    const Eigen::VectorXf err = icm.net->forward_errors(obs, next, act);
    for (Eigen::Index t = 0; t < n; ++t)
      seq[static_cast<std::size_t>(t)].intrinsic = intrinsic_reward(icm.config, static_cast<double>(err[t]));
  }
}

}  // namespace

UpdateStats ppo_update(ActorCritic<float>& net, Adam<float>& opt, RolloutBuffer& buffer, const PpoConfig& config,
                       const LrSchedule& schedule, double step, Rng& shuffle_rng, IcmLearner* icm) {
  if (!buffer.full()) throw LifecycleError("ppo_update needs a finished rollout buffer");
  UpdateStats stats;
  std::vector<const Transition*> flat;
  if (icm) fill_intrinsic(buffer, *icm);
  for (int i = 0; i < buffer.num_instances(); ++i)
    for (const auto& t : buffer.sequence(i)) flat.push_back(&t);
  const std::size_t n = flat.size();
  stats.samples = n;
  if (n == 0) return stats;

  std::vector<double> adv, ret;
  advantage_targets(buffer, config, icm ? icm->config.gamma : config.gamma, adv, ret);
  double intrinsic = 0.0;
  for (const auto* t : flat) intrinsic += t->intrinsic;
  stats.intrinsic_mean = intrinsic / static_cast<double>(n);

  const double lr = lr_at(schedule, step);
  const double decay = schedule.initial > 0.0 ? lr / schedule.initial : 0.0;
  const double entropy_coef = config.entropy_coef * decay;
  const int obs_dim = net.obs_dim();
  const int act_rows = net.kind() == ActionKind::continuous ? net.action_dim() : 1;
  const int exec_rows = static_cast<int>(flat[0]->executed.size());

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t mb = static_cast<std::size_t>(config.minibatch_size);
  ParamSet<float> grads = net.params.zeros_like();
  ParamSet<float> icm_grads;
  if (icm) icm_grads = icm->net->params.zeros_like();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t k = n - 1; k > 0; --k) std::swap(order[k], order[shuffle_rng.below(k + 1)]);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t count = std::min(mb, n - start);
      PolicyBatch<float> b;
      b.obs.resize(obs_dim, static_cast<Eigen::Index>(count));
      b.actions.resize(act_rows, static_cast<Eigen::Index>(count));
      b.log_prob_old.resize(static_cast<Eigen::Index>(count));
      b.advantages.resize(static_cast<Eigen::Index>(count));
      b.value_targets.resize(static_cast<Eigen::Index>(count));
      Eigen::MatrixXf next_obs, executed;
      if (icm) {
        next_obs.resize(obs_dim, static_cast<Eigen::Index>(count));
        executed.resize(exec_rows, static_cast<Eigen::Index>(count));
      }
      std::vector<double> mb_adv(count);
      for (std::size_t j = 0; j < count; ++j) mb_adv[j] = adv[order[start + j]];
      if (config.normalize_advantages) normalize_advantages(mb_adv);
      for (std::size_t j = 0; j < count; ++j) {
        const std::size_t idx = order[start + j];
        const Transition& t = *flat[idx];
        const Eigen::Index c = static_cast<Eigen::Index>(j);
        b.obs.col(c) = t.obs;
        b.actions.col(c) = t.action;
        b.log_prob_old[c] = t.log_prob;
        b.advantages[c] = static_cast<float>(mb_adv[j]);
        b.value_targets[c] = static_cast<float>(ret[idx] / config.value_scale);
        if (icm) {
          next_obs.col(c) = t.next_obs;
          executed.col(c) = t.executed;
        }
      }
      grads.flat().setZero();
      const LossStats ls = ppo_loss<float>(net, net.params, b, config, entropy_coef, &grads);
      opt.step(net.params.flat(), grads.flat(), lr);
      stats.policy_loss += ls.policy_loss;
      stats.value_loss += ls.value_loss;
      stats.entropy += ls.entropy;
      stats.clip_fraction += ls.clip_fraction;
      stats.mean_ratio += ls.mean_ratio;
      if (icm) {
        icm_grads.flat().setZero();
        const auto il = icm->net->loss(icm->net->params, b.obs, next_obs, executed, icm->config.forward_weight,
                                       &icm_grads);
        icm->opt->step(icm->net->params.flat(), icm_grads.flat(), icm->config.learning_rate);
        stats.forward_loss += il.forward;
        stats.inverse_loss += il.inverse;
      }
      ++stats.minibatches;
    }
  }
  const double m = static_cast<double>(stats.minibatches);
  stats.policy_loss /= m;
  stats.value_loss /= m;
  stats.entropy /= m;
  stats.clip_fraction /= m;
  stats.mean_ratio /= m;
  stats.forward_loss /= m;
  stats.inverse_loss /= m;
  return stats;
}

template LossStats ppo_loss<float>(const ActorCritic<float>&, const ParamSet<float>&, const PolicyBatch<float>&,
                                   const PpoConfig&, double, ParamSet<float>*);
template LossStats ppo_loss<double>(const ActorCritic<double>&, const ParamSet<double>&, const PolicyBatch<double>&,
                                    const PpoConfig&, double, ParamSet<double>*);
template void evaluate_actions<float>(const ActorCritic<float>&, const ParamSet<float>&, const MatT<float>&,
                                      const MatT<float>&, VecT<float>&, VecT<float>&);
template void evaluate_actions<double>(const ActorCritic<double>&, const ParamSet<double>&, const MatT<double>&,
                                       const MatT<double>&, VecT<double>&, VecT<double>&);

}  // namespace minesearch
