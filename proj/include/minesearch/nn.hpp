#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "minesearch/rng.hpp"

namespace minesearch {

template <typename T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowT = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// Named tensors packed into one flat vector. Gradients and optimizer moments
// reuse the same layout, so "same layout" is all the shape checking needed.
template <typename T>
class ParamSet {
 public:
  struct Tensor {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::size_t offset = 0;
  };

  int add(const std::string& name, int rows, int cols);
  int find(const std::string& name) const;

  Eigen::Map<MatT<T>> operator[](int id);
  Eigen::Map<const MatT<T>> operator[](int id) const;

  VecT<T>& flat() { return data_; }
  const VecT<T>& flat() const { return data_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::size_t size() const { return static_cast<std::size_t>(data_.size()); }

  ParamSet zeros_like() const;
  bool same_layout(const ParamSet& other) const;
  void check_layout(const ParamSet& other, const char* what) const;

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& t : tensors_) out.add(t.name, t.rows, t.cols);
    out.flat() = data_.template cast<U>();
    return out;
  }

 private:
  std::vector<Tensor> tensors_;
  VecT<T> data_;
};

// gate(x) = x * sigmoid(x)
template <typename T>
MatT<T> gate(const MatT<T>& x);
template <typename T>
MatT<T> gate_derivative(const MatT<T>& x);

struct LayerSpec {
  int out = 0;
  bool gated = true;
};

// Dense stack on column batches (features x batch). Optionally gates the
// input; each layer is W x + b, followed by the gate when `gated`.
template <typename T>
class Mlp {
 public:
  struct Cache {
    bool valid = false;
    MatT<T> x;                    // raw input
    std::vector<MatT<T>> inputs;  // input to each dense layer
    std::vector<MatT<T>> pre;     // pre-activation of each dense layer
  };

  Mlp() = default;
  Mlp(ParamSet<T>& ps, const std::string& prefix, int in, bool gate_input, std::vector<LayerSpec> layers);

  // Glorot-uniform weights, zero biases; the last layer is scaled by `last_scale`.
  void init(ParamSet<T>& ps, Rng& rng, double last_scale = 1.0) const;

  MatT<T> forward(const ParamSet<T>& ps, const MatT<T>& x, Cache* cache = nullptr) const;
  // Accumulates parameter gradients into `grads` and returns dL/dx.
  // Consumes the cache; a second backward needs a new forward.
  MatT<T> backward(const ParamSet<T>& ps, Cache& cache, const MatT<T>& dy, ParamSet<T>& grads) const;

  int in_dim() const { return in_; }
  int out_dim() const { return layers_.empty() ? in_ : layers_.back().out; }

 private:
  int in_ = 0;
  bool gate_input_ = true;
  std::vector<LayerSpec> layers_;
  std::vector<int> w_ids_;
  std::vector<int> b_ids_;
};

enum class ActionKind { continuous, discrete };

// Shared gated trunk with a policy head and a value head.
template <typename T>
class ActorCritic {
 public:
  struct Output {
    MatT<T> head;   // tanh-bounded means (continuous) or logits (discrete), action_dim x B
    RowT<T> value;  // 1 x B, in network units
  };
  struct Cache {
    bool valid = false;
    typename Mlp<T>::Cache trunk;
    typename Mlp<T>::Cache policy;
    typename Mlp<T>::Cache value;
    MatT<T> head;  // post-activation policy output
  };

  ActorCritic() = default;
  ActorCritic(int obs_dim, ActionKind kind, int action_dim, int hidden = 256);

  void init(Rng& rng, double log_std_init = -0.5);

  Output forward(const ParamSet<T>& ps, const MatT<T>& obs, Cache* cache = nullptr) const;
  Output forward(const MatT<T>& obs, Cache* cache = nullptr) const { return forward(params, obs, cache); }
  // d_head is dL/d(head output); d_log_std is only read for continuous heads.
  void backward(const ParamSet<T>& ps, Cache& cache, const MatT<T>& d_head, const RowT<T>& d_value,
                const VecT<T>& d_log_std, ParamSet<T>& grads) const;

  VecT<T> log_std(const ParamSet<T>& ps) const;
  VecT<T> log_std() const { return log_std(params); }

  int obs_dim() const { return obs_dim_; }
  int action_dim() const { return action_dim_; }
  ActionKind kind() const { return kind_; }
  int log_std_id() const { return log_std_id_; }

  ParamSet<T> params;
  // Fixed per-feature multiplier applied to observations before the trunk.
  VecT<T> input_scale;

 private:
  int obs_dim_ = 0;
  int action_dim_ = 0;
  ActionKind kind_ = ActionKind::discrete;
  Mlp<T> trunk_;
  Mlp<T> policy_head_;
  Mlp<T> value_head_;
  int log_std_id_ = -1;
};

// Diagonal Gaussian and categorical helpers, per column.
template <typename T>
T gaussian_log_prob(const VecT<T>& mean, const VecT<T>& log_std, const VecT<T>& action);
template <typename T>
T gaussian_entropy(const VecT<T>& log_std);
template <typename T>
VecT<T> log_softmax(const VecT<T>& logits);
template <typename T>
T categorical_entropy(const VecT<T>& logits);

struct LrSchedule {
  enum class Mode { linear, constant };
  double initial = 3e-4;
  double total_steps = 1e7;
  Mode mode = Mode::linear;
};
double lr_at(const LrSchedule& s, double step);
const char* to_string(LrSchedule::Mode m);
LrSchedule::Mode parse_schedule_mode(const std::string& text);

template <typename T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(std::size_t n) : m(VecT<T>::Zero(static_cast<Eigen::Index>(n))), v(m) {}

  void step(VecT<T>& params, const VecT<T>& grads, double rate);

  VecT<T> m;
  VecT<T> v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Hash of a tensor's raw bytes (layout order); used for continuity checks.
template <typename T>
std::uint64_t param_hash(const ParamSet<T>& ps);

}  // namespace minesearch
