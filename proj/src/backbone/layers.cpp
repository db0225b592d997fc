#include "ladapt/backbone/layers.hpp"

#include <cmath>

namespace ladapt {

template <typename T>
Linear<T> Linear<T>::uniform(std::size_t in, std::size_t out, double range, Rng& rng) {
  Tensor<T> w(Shape{in, out});
  for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-range, range));
  return Linear{Var<T>::leaf(std::move(w), false), Var<T>::leaf(Tensor<T>(Shape{out}), false)};
}

template <typename T>
Linear<T> Linear<T>::init(std::size_t in, std::size_t out, Rng& rng) {
  return uniform(in, out, 1.0 / std::sqrt(static_cast<double>(in)), rng);
}

template <typename T>
Linear<T> Linear<T>::zeros(std::size_t in, std::size_t out) {
  return Linear{Var<T>::leaf(Tensor<T>(Shape{in, out}), false),
                Var<T>::leaf(Tensor<T>(Shape{out}), false)};
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, ParameterSet<T>& out) const {
  out.add(prefix + "weight", weight);
  out.add(prefix + "bias", bias);
}

template <typename T>
LayerNorm<T> LayerNorm<T>::init(std::size_t dim, double eps) {
  return LayerNorm{Var<T>::leaf(Tensor<T>(Shape{dim}, T{1}), false),
                   Var<T>::leaf(Tensor<T>(Shape{dim}, T{0}), false), static_cast<T>(eps)};
}

template <typename T>
void LayerNorm<T>::collect(const std::string& prefix, ParameterSet<T>& out) const {
  out.add(prefix + "gamma", gamma);
  out.add(prefix + "beta", beta);
}

template struct Linear<float>;
template struct Linear<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;

}  // namespace ladapt
