#include "minesearch/icm.hpp"

#include <cmath>

#include "minesearch/errors.hpp"

namespace minesearch {

void validate(const IcmConfig& c, const char* agent) {
  const std::string a(agent);
  if (!(c.strength >= 0.0) || !std::isfinite(c.strength)) throw ConfigError(a + ".curiosity_strength must be >= 0");
  if (!(c.gamma > 0.0 && c.gamma <= 1.0)) throw ConfigError(a + ".curiosity_gamma must lie in (0, 1]");
  if (!(c.learning_rate >= 0.0)) throw ConfigError(a + ".curiosity_learning_rate must be >= 0");
  if (!(c.forward_weight > 0.0 && c.forward_weight < 1.0))
    throw ConfigError(a + ".curiosity_forward_weight must lie in (0, 1)");
  if (c.feature_dim < 1 || c.hidden < 1) throw ConfigError(a + ": ICM sizes must be positive");
}

double intrinsic_reward(const IcmConfig& config, double forward_error) {
  if (!(forward_error >= 0.0)) throw NumericError("forward error must be a nonnegative number");
  return config.strength * forward_error;
}

template <typename T>
Icm<T>::Icm(int obs_dim, ActionKind kind, int action_dim, int feature_dim, int hidden)
    : obs_dim_(obs_dim), action_dim_(action_dim), feature_dim_(feature_dim), kind_(kind) {
  encoder_ = Mlp<T>(params, "icm.encoder", obs_dim, true, {{hidden, true}, {hidden, true}, {feature_dim, false}});
  forward_ = Mlp<T>(params, "icm.forward", feature_dim + action_dim, true, {{hidden, true}, {feature_dim, false}});
  inverse_ = Mlp<T>(params, "icm.inverse", 2 * feature_dim, true, {{hidden, true}, {action_dim, false}});
  input_scale = VecT<T>::Ones(obs_dim);
}

template <typename T>
void Icm<T>::init(Rng& rng) {
  encoder_.init(params, rng);
  forward_.init(params, rng);
  inverse_.init(params, rng);
}

template <typename T>
MatT<T> Icm<T>::encode(const ParamSet<T>& ps, const MatT<T>& obs, typename Mlp<T>::Cache* cache) const {
  if (obs.rows() != obs_dim_)
    throw ShapeError("ICM expects " + std::to_string(obs_dim_) + "-dim observations, got " +
                     std::to_string(obs.rows()));
  return encoder_.forward(ps, obs.array().colwise() * input_scale.array(), cache);
}

template <typename T>
MatT<T> Icm<T>::action_features(const MatT<T>& actions) const {
  if (kind_ == ActionKind::continuous) {
    if (actions.rows() != action_dim_) throw ShapeError("ICM: continuous action rows do not match");
    return actions;
  }
  if (actions.rows() != 1) throw ShapeError("ICM: discrete actions must be a 1 x B row of ids");
  MatT<T> onehot = MatT<T>::Zero(action_dim_, actions.cols());
  for (Eigen::Index b = 0; b < actions.cols(); ++b) {
    const int id = static_cast<int>(actions(0, b));
    if (id < 0 || id >= action_dim_) throw ShapeError("ICM: discrete action id out of range");
    onehot(id, b) = T(1);
  }
  return onehot;
}

template <typename T>
MatT<T> Icm<T>::predict_next(const ParamSet<T>& ps, const MatT<T>& phi, const MatT<T>& actions) const {
  MatT<T> in(feature_dim_ + action_dim_, phi.cols());
  in << phi, action_features(actions);
  return forward_.forward(ps, in);
}

template <typename T>
MatT<T> Icm<T>::predict_action(const ParamSet<T>& ps, const MatT<T>& phi, const MatT<T>& phi_next) const {
  MatT<T> in(2 * feature_dim_, phi.cols());
  in << phi, phi_next;
  return inverse_.forward(ps, in);
}

template <typename T>
typename Icm<T>::Losses Icm<T>::loss(const ParamSet<T>& ps, const MatT<T>& obs, const MatT<T>& next_obs,
                                     const MatT<T>& actions, double forward_weight, ParamSet<T>* grads,
                                     const ParamSet<T>* frozen) const {
  if (obs.cols() != next_obs.cols() || obs.cols() != actions.cols() || obs.cols() == 0)
    throw ShapeError("ICM batch columns do not match");
  const Eigen::Index n = obs.cols();
  const T inv_n = T(1) / static_cast<T>(n);
  const T beta = static_cast<T>(forward_weight);
  Losses out;

  typename Mlp<T>::Cache enc_s, enc_next;
  const MatT<T> phi = encode(ps, obs, grads ? &enc_s : nullptr);
  const MatT<T> phi_next = encode(ps, next_obs, grads ? &enc_next : nullptr);

  // Forward model on detached features.
  const MatT<T> phi_d = frozen ? encode(*frozen, obs) : phi;
  const MatT<T> target = frozen ? encode(*frozen, next_obs) : phi_next;
  MatT<T> f_in(feature_dim_ + action_dim_, n);
  f_in << phi_d, action_features(actions);
  typename Mlp<T>::Cache f_cache;
  const MatT<T> phi_hat = forward_.forward(ps, f_in, grads ? &f_cache : nullptr);
  const MatT<T> diff = phi_hat - target;
  out.forward_per_sample = (T(0.5) * diff.array().square().colwise().sum()).transpose();
  out.forward = static_cast<double>(out.forward_per_sample.mean());

  // Inverse model.
  MatT<T> i_in(2 * feature_dim_, n);
  i_in << phi, phi_next;
  typename Mlp<T>::Cache i_cache;
  const MatT<T> a_hat = inverse_.forward(ps, i_in, grads ? &i_cache : nullptr);
  MatT<T> d_a_hat(a_hat.rows(), n);
  double inverse_sum = 0.0;
  if (kind_ == ActionKind::discrete) {
    const MatT<T> onehot = action_features(actions);
    for (Eigen::Index b = 0; b < n; ++b) {
      const VecT<T> lp = log_softmax<T>(a_hat.col(b));
      inverse_sum -= static_cast<double>((onehot.col(b).array() * lp.array()).sum());
      d_a_hat.col(b) = (lp.array().exp() - onehot.col(b).array()) * inv_n;
    }
  } else {
    const MatT<T> err = a_hat - actions;
    const T inv_dim = T(1) / static_cast<T>(action_dim_);
    for (Eigen::Index b = 0; b < n; ++b) inverse_sum += static_cast<double>(err.col(b).squaredNorm() * inv_dim);
    d_a_hat = err * (T(2) * inv_dim * inv_n);
  }
  out.inverse = inverse_sum / static_cast<double>(n);
  out.total = forward_weight * out.forward + (1.0 - forward_weight) * out.inverse;

  if (grads) {
    params.check_layout(*grads, "ICM gradients");
    forward_.backward(ps, f_cache, diff * (beta * inv_n), *grads);
    const MatT<T> d_in = inverse_.backward(ps, i_cache, d_a_hat * (T(1) - beta), *grads);
    encoder_.backward(ps, enc_s, d_in.topRows(feature_dim_), *grads);
    encoder_.backward(ps, enc_next, d_in.bottomRows(feature_dim_), *grads);
  }
  return out;
}

template <typename T>
VecT<T> Icm<T>::forward_errors(const MatT<T>& obs, const MatT<T>& next_obs, const MatT<T>& actions) const {
  const MatT<T> phi = encode(params, obs);
  const MatT<T> phi_next = encode(params, next_obs);
  const MatT<T> diff = predict_next(params, phi, actions) - phi_next;
  return (T(0.5) * diff.array().square().colwise().sum()).transpose();
}

template class Icm<float>;
template class Icm<double>;

}  // namespace minesearch
