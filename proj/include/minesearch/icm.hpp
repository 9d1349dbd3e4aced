#pragma once

#include <vector>

#include "minesearch/nn.hpp"

namespace minesearch {

struct IcmConfig {
  double strength = 0.02;        // weight of the intrinsic reward
  double gamma = 0.99;           // discount of the intrinsic stream
  double learning_rate = 3e-4;   // constant
  double forward_weight = 0.2;   // beta: total = beta * L_F + (1 - beta) * L_I
  int feature_dim = 128;
  int hidden = 256;
};

void validate(const IcmConfig& c, const char* agent);

// Per-transition curiosity bonus: strength * L_F.
double intrinsic_reward(const IcmConfig& config, double forward_error);

// Encoder phi(s), forward model f(phi, a) and inverse model g(phi, phi').
// The forward model reads detached features, so the encoder learns only
// from the inverse loss.
template <typename T>
class Icm {
 public:
  struct Losses {
    double forward = 0;   // mean L_F over the batch
    double inverse = 0;   // mean L_I over the batch
    double total = 0;
    VecT<T> forward_per_sample;
  };

  Icm() = default;
  Icm(int obs_dim, ActionKind kind, int action_dim, int feature_dim = 128, int hidden = 256);

  void init(Rng& rng);

  MatT<T> encode(const ParamSet<T>& ps, const MatT<T>& obs, typename Mlp<T>::Cache* cache = nullptr) const;
  MatT<T> encode(const MatT<T>& obs) const { return encode(params, obs); }
  // One-hot for discrete ids (a 1 x B row of 0-based ids); the raw vectors otherwise.
  MatT<T> action_features(const MatT<T>& actions) const;
  MatT<T> predict_next(const ParamSet<T>& ps, const MatT<T>& phi, const MatT<T>& actions) const;
  MatT<T> predict_action(const ParamSet<T>& ps, const MatT<T>& phi, const MatT<T>& phi_next) const;

  // Mean losses and, when `grads` is given, their gradients. Forward-model
  // inputs and targets are computed with `frozen` parameters when supplied
  // (they carry no gradient either way).
  Losses loss(const ParamSet<T>& ps, const MatT<T>& obs, const MatT<T>& next_obs, const MatT<T>& actions,
              double forward_weight, ParamSet<T>* grads = nullptr, const ParamSet<T>* frozen = nullptr) const;

  // Per-sample L_F with the current parameters.
  VecT<T> forward_errors(const MatT<T>& obs, const MatT<T>& next_obs, const MatT<T>& actions) const;

  int feature_dim() const { return feature_dim_; }
  int obs_dim() const { return obs_dim_; }
  ActionKind kind() const { return kind_; }

  ParamSet<T> params;
  VecT<T> input_scale;

 private:
  int obs_dim_ = 0;
  int action_dim_ = 0;
  int feature_dim_ = 0;
  ActionKind kind_ = ActionKind::discrete;
  Mlp<T> encoder_;
  Mlp<T> forward_;
  Mlp<T> inverse_;
};

}  // namespace minesearch
