#include "ladapt/heads/heads.hpp"

namespace ladapt {

template <typename T>
CtcHead<T> CtcHead<T>::init(std::size_t input_dim, std::size_t vocab_size, Rng& rng) {
  if (vocab_size == 0) throw ConfigError("CtcHead: vocabulary must be non-empty");
  return CtcHead{Linear<T>::init(input_dim, vocab_size + 1, rng)};
}

template <typename T>
void CtcHead<T>::collect(const std::string& prefix, ParameterSet<T>& params) const {
  fc.collect(prefix + "fc.", params);
}

template <typename T>
ClsHead<T> ClsHead<T>::init(std::size_t input_dim, std::size_t hidden, std::size_t classes, Rng& rng) {
  if (hidden == 0 || classes == 0) throw ConfigError("ClsHead: hidden and classes must be positive");
  ClsHead head;
  head.fc1 = Linear<T>::init(input_dim, hidden, rng);
  head.fc2 = Linear<T>::init(hidden, classes, rng);
  return head;
}

template <typename T>
ClsOutput<T> ClsHead<T>::forward(const Var<T>& h) const {
  if (h.value().rank() != 2 || h.value().rows() == 0) {
    throw ShapeError("ClsHead: expected a non-empty [T x d] sequence, got " + shape_str(h.shape()));
  }
  Var<T> pooled = mean_over_time(fc1(h));
  Var<T> logits = fc2(reshape(pooled, Shape{1, pooled.value().numel()}));
  return {reshape(logits, Shape{logits.value().numel()}), pooled};
}

template <typename T>
void ClsHead<T>::collect(const std::string& prefix, ParameterSet<T>& params) const {
  fc1.collect(prefix + "fc1.", params);
  fc2.collect(prefix + "fc2.", params);
}

template struct CtcHead<float>;
template struct CtcHead<double>;
template struct ClsHead<float>;
template struct ClsHead<double>;

}  // namespace ladapt
