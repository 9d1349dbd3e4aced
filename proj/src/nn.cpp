#include "minesearch/nn.hpp"

#include <cmath>
#include <numbers>

#include "minesearch/errors.hpp"

namespace minesearch {

template <typename T>
int ParamSet<T>::add(const std::string& name, int rows, int cols) {
  if (find(name) >= 0) throw ShapeError("duplicate tensor name '" + name + "'");
  if (rows <= 0 || cols <= 0) throw ShapeError("tensor '" + name + "' must have positive shape");
  Tensor t{name, rows, cols, size()};
  const Eigen::Index old = data_.size();
  data_.conservativeResize(old + static_cast<Eigen::Index>(rows) * cols);
  data_.tail(static_cast<Eigen::Index>(rows) * cols).setZero();
  tensors_.push_back(t);
  return static_cast<int>(tensors_.size()) - 1;
}

template <typename T>
int ParamSet<T>::find(const std::string& name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].name == name) return static_cast<int>(i);
  return -1;
}

template <typename T>
Eigen::Map<MatT<T>> ParamSet<T>::operator[](int id) {
  const Tensor& t = tensors_.at(static_cast<std::size_t>(id));
  return Eigen::Map<MatT<T>>(data_.data() + t.offset, t.rows, t.cols);
}

template <typename T>
Eigen::Map<const MatT<T>> ParamSet<T>::operator[](int id) const {
  const Tensor& t = tensors_.at(static_cast<std::size_t>(id));
  return Eigen::Map<const MatT<T>>(data_.data() + t.offset, t.rows, t.cols);
}

template <typename T>
ParamSet<T> ParamSet<T>::zeros_like() const {
  ParamSet out = *this;
  out.data_.setZero();
  return out;
}

template <typename T>
bool ParamSet<T>::same_layout(const ParamSet& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const Tensor& a = tensors_[i];
    const Tensor& b = other.tensors_[i];
    if (a.name != b.name || a.rows != b.rows || a.cols != b.cols) return false;
  }
  return true;
}

template <typename T>
void ParamSet<T>::check_layout(const ParamSet& other, const char* what) const {
  if (!same_layout(other)) throw ShapeError(std::string(what) + ": parameter layouts differ");
}

template <typename T>
MatT<T> gate(const MatT<T>& x) {
  return x.unaryExpr([](T v) { return v / (T(1) + std::exp(-v)); });
}

template <typename T>
MatT<T> gate_derivative(const MatT<T>& x) {
  return x.unaryExpr([](T v) {
    const T s = T(1) / (T(1) + std::exp(-v));
    return s + v * s * (T(1) - s);
  });
}

template <typename T>
Mlp<T>::Mlp(ParamSet<T>& ps, const std::string& prefix, int in, bool gate_input, std::vector<LayerSpec> layers)
    : in_(in), gate_input_(gate_input), layers_(std::move(layers)) {
  int fan_in = in;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string base = prefix + "." + std::to_string(l);
    w_ids_.push_back(ps.add(base + ".w", layers_[l].out, fan_in));
    b_ids_.push_back(ps.add(base + ".b", layers_[l].out, 1));
    fan_in = layers_[l].out;
  }
}

template <typename T>
void Mlp<T>::init(ParamSet<T>& ps, Rng& rng, double last_scale) const {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto w = ps[w_ids_[l]];
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    const double scale = (l + 1 == layers_.size()) ? last_scale : 1.0;
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = static_cast<T>(scale * rng.uniform(-limit, limit));
    ps[b_ids_[l]].setZero();
  }
}

template <typename T>
MatT<T> Mlp<T>::forward(const ParamSet<T>& ps, const MatT<T>& x, Cache* cache) const {
  if (x.rows() != in_)
    throw ShapeError("MLP expects " + std::to_string(in_) + " input rows, got " + std::to_string(x.rows()));
  MatT<T> h = gate_input_ ? gate<T>(x) : x;
  if (cache) {
    cache->x = x;
    cache->inputs.clear();
    cache->pre.clear();
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    MatT<T> pre = ps[w_ids_[l]] * h;
    pre.colwise() += ps[b_ids_[l]].col(0);
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->pre.push_back(pre);
    }
    h = layers_[l].gated ? gate<T>(pre) : std::move(pre);
  }
  if (cache) cache->valid = true;
  return h;
}

template <typename T>
MatT<T> Mlp<T>::backward(const ParamSet<T>& ps, Cache& cache, const MatT<T>& dy, ParamSet<T>& grads) const {
  if (!cache.valid) throw TapeError("backward called without a recorded forward pass");
  ps.check_layout(grads, "MLP backward");
  MatT<T> dh = dy;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    MatT<T> d_pre = layers_[k].gated ? MatT<T>(dh.array() * gate_derivative<T>(cache.pre[k]).array()) : dh;
    grads[w_ids_[k]].noalias() += d_pre * cache.inputs[k].transpose();
    grads[b_ids_[k]].col(0) += d_pre.rowwise().sum();
    dh = ps[w_ids_[k]].transpose() * d_pre;
  }
  cache.valid = false;
  if (gate_input_) return dh.array() * gate_derivative<T>(cache.x).array();
  return dh;
}

template <typename T>
ActorCritic<T>::ActorCritic(int obs_dim, ActionKind kind, int action_dim, int hidden)
    : obs_dim_(obs_dim), action_dim_(action_dim), kind_(kind) {
  trunk_ = Mlp<T>(params, "trunk", obs_dim, true, {{hidden, true}, {hidden, true}});
  policy_head_ = Mlp<T>(params, "policy", hidden, false, {{action_dim, false}});
  value_head_ = Mlp<T>(params, "value", hidden, false, {{1, false}});
  if (kind == ActionKind::continuous) log_std_id_ = params.add("log_std", action_dim, 1);
  input_scale = VecT<T>::Ones(obs_dim);
}

template <typename T>
void ActorCritic<T>::init(Rng& rng, double log_std_init) {
  trunk_.init(params, rng);
  policy_head_.init(params, rng, 0.01);
  value_head_.init(params, rng);
  if (log_std_id_ >= 0) params[log_std_id_].setConstant(static_cast<T>(log_std_init));
}

template <typename T>
typename ActorCritic<T>::Output ActorCritic<T>::forward(const ParamSet<T>& ps, const MatT<T>& obs,
                                                        Cache* cache) const {
  if (obs.rows() != obs_dim_)
    throw ShapeError("policy expects " + std::to_string(obs_dim_) + "-dim observations, got " +
                     std::to_string(obs.rows()));
  const MatT<T> x = obs.array().colwise() * input_scale.array();
  const MatT<T> features = trunk_.forward(ps, x, cache ? &cache->trunk : nullptr);
  Output out;
  out.head = policy_head_.forward(ps, features, cache ? &cache->policy : nullptr);
  if (kind_ == ActionKind::continuous) out.head = out.head.array().tanh();
  out.value = value_head_.forward(ps, features, cache ? &cache->value : nullptr);
  if (cache) {
    cache->head = out.head;
    cache->valid = true;
  }
  return out;
}

template <typename T>
void ActorCritic<T>::backward(const ParamSet<T>& ps, Cache& cache, const MatT<T>& d_head, const RowT<T>& d_value,
                              const VecT<T>& d_log_std, ParamSet<T>& grads) const {
  if (!cache.valid) throw TapeError("backward called without a recorded forward pass");
  MatT<T> d_pre = d_head;
  if (kind_ == ActionKind::continuous) d_pre = d_head.array() * (T(1) - cache.head.array().square());
  MatT<T> d_features = policy_head_.backward(ps, cache.policy, d_pre, grads);
  d_features += value_head_.backward(ps, cache.value, MatT<T>(d_value), grads);
  trunk_.backward(ps, cache.trunk, d_features, grads);
  if (log_std_id_ >= 0) grads[log_std_id_].col(0) += d_log_std;
  cache.valid = false;
}

template <typename T>
VecT<T> ActorCritic<T>::log_std(const ParamSet<T>& ps) const {
  if (log_std_id_ < 0) return VecT<T>();
  return ps[log_std_id_].col(0);
}

template <typename T>
T gaussian_log_prob(const VecT<T>& mean, const VecT<T>& log_std, const VecT<T>& action) {
  const T half_log_2pi = static_cast<T>(0.5 * std::log(2.0 * std::numbers::pi));
  T lp = 0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const T z = (action[i] - mean[i]) / std::exp(log_std[i]);
    lp += T(-0.5) * z * z - log_std[i] - half_log_2pi;
  }
  return lp;
}

template <typename T>
T gaussian_entropy(const VecT<T>& log_std) {
  const T c = static_cast<T>(0.5 + 0.5 * std::log(2.0 * std::numbers::pi));
  return static_cast<T>(log_std.size()) * c + log_std.sum();
}

template <typename T>
VecT<T> log_softmax(const VecT<T>& logits) {
  const T mx = logits.maxCoeff();
  const T lse = mx + std::log((logits.array() - mx).exp().sum());
  return logits.array() - lse;
}

template <typename T>
T categorical_entropy(const VecT<T>& logits) {
  const VecT<T> lp = log_softmax<T>(logits);
  return -(lp.array().exp() * lp.array()).sum();
}

double lr_at(const LrSchedule& s, double step) {
  if (step < 0) throw UsageError("learning-rate step must be >= 0");
  if (s.mode == LrSchedule::Mode::constant) return s.initial;
  if (s.total_steps <= 0) return 0.0;
  return s.initial * std::max(0.0, 1.0 - step / s.total_steps);
}

const char* to_string(LrSchedule::Mode m) { return m == LrSchedule::Mode::linear ? "linear" : "constant"; }

LrSchedule::Mode parse_schedule_mode(const std::string& text) {
  if (text == "linear") return LrSchedule::Mode::linear;
  if (text == "constant") return LrSchedule::Mode::constant;
  throw ConfigError("schedule must be 'linear' or 'constant', got '" + text + "'");
}

template <typename T>
void Adam<T>::step(VecT<T>& params, const VecT<T>& grads, double rate) {
  if (params.size() != grads.size() || params.size() != m.size())
    throw ShapeError("Adam: parameter, gradient and moment sizes differ");
  ++t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  const T b1 = static_cast<T>(beta1);
  const T b2 = static_cast<T>(beta2);
  const T step_size = static_cast<T>(rate / c1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
  const T e = static_cast<T>(eps);
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    m[i] = b1 * m[i] + (T(1) - b1) * g;
    v[i] = b2 * v[i] + (T(1) - b2) * g * g;
    params[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + e);
  }
}

template <typename T>
std::uint64_t param_hash(const ParamSet<T>& ps) {
  return fnv1a64(ps.flat().data(), ps.size() * sizeof(T));
}

#define MINESEARCH_INSTANTIATE(T)                                                   \
  template class ParamSet<T>;                                                       \
  template MatT<T> gate<T>(const MatT<T>&);                                         \
  template MatT<T> gate_derivative<T>(const MatT<T>&);                              \
  template class Mlp<T>;                                                            \
  template class ActorCritic<T>;                                                    \
  template T gaussian_log_prob<T>(const VecT<T>&, const VecT<T>&, const VecT<T>&);  \
  template T gaussian_entropy<T>(const VecT<T>&);                                   \
  template VecT<T> log_softmax<T>(const VecT<T>&);                                  \
  template T categorical_entropy<T>(const VecT<T>&);                                \
  template class Adam<T>;                                                           \
  template std::uint64_t param_hash<T>(const ParamSet<T>&);

MINESEARCH_INSTANTIATE(float)
MINESEARCH_INSTANTIATE(double)

}  // namespace minesearch
