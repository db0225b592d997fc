#pragma once

#include <string>

#include "ladapt/autodiff/ops.hpp"
#include "ladapt/autodiff/parameters.hpp"
#include "ladapt/autodiff/rng.hpp"

namespace ladapt {

/// Fully connected layer y = x W + b with W stored [in x out].
template <typename T>
struct Linear {
  Var<T> weight;
  Var<T> bias;

  /// W ~ U(-1/sqrt(in), 1/sqrt(in)), b = 0.
  static Linear init(std::size_t in, std::size_t out, Rng& rng);
  /// W ~ U(-range, range), b = 0.
  static Linear uniform(std::size_t in, std::size_t out, double range, Rng& rng);
  static Linear zeros(std::size_t in, std::size_t out);

  Var<T> operator()(const Var<T>& x) const { return linear(x, weight, bias); }
  std::size_t in_features() const { return weight.value().rows(); }
  std::size_t out_features() const { return weight.value().cols(); }
  std::size_t param_count() const { return weight.value().numel() + bias.value().numel(); }

  void collect(const std::string& prefix, ParameterSet<T>& out) const;
};

template <typename T>
struct LayerNorm {
  Var<T> gamma;
  Var<T> beta;
  T eps = T(1e-5);

  /// gamma = 1, beta = 0.
  static LayerNorm init(std::size_t dim, double eps);

  Var<T> operator()(const Var<T>& x) const { return layer_norm(x, gamma, beta, eps); }
  std::size_t param_count() const { return gamma.value().numel() + beta.value().numel(); }

  void collect(const std::string& prefix, ParameterSet<T>& out) const;
};

}  // namespace ladapt
