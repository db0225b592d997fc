#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ladapt/backbone/config.hpp"
#include "ladapt/backbone/layers.hpp"

namespace ladapt {

enum class LAdapterVariant { Weight, LN, ActLN, FC, FCAct, FCLN, Base, Skip };

std::string to_string(LAdapterVariant variant);
/// Accepts the names produced by to_string; throws ConfigError otherwise.
LAdapterVariant l_adapter_variant_from_string(const std::string& name);
/// All eight variants in table order.
const std::vector<LAdapterVariant>& all_l_adapter_variants();

struct LAdapterConfig {
  LAdapterVariant variant = LAdapterVariant::Base;
  std::size_t embed_dim = 512;
  std::size_t skip_bottleneck = 256;
  Activation activation = Activation::GELU;

  friend bool operator==(const LAdapterConfig&, const LAdapterConfig&) = default;
};

/// Width of a_l for this variant.
std::size_t l_adapter_output_dim(const LAdapterConfig& config, std::size_t d_model);
std::size_t l_adapter_param_count(const LAdapterConfig& config, std::size_t d_model);
/// down + up + LayerNorm of a residual bottleneck module.
std::size_t bottleneck_param_count(std::size_t d_model, std::size_t bottleneck);

/// x + LN(up(act(down(x)))). The up-projection starts at zero and LN beta
/// at zero, so a fresh adapter is the identity map.
template <typename T>
struct BottleneckAdapter {
  Linear<T> down, up;
  LayerNorm<T> ln;
  Activation activation = Activation::GELU;

  static constexpr double kDownInitRange = 1e-2;

  /// Throws ConfigError for bottleneck 0 or bottleneck == d_model.
  static BottleneckAdapter init(std::size_t d_model, std::size_t bottleneck, Activation activation,
                                double ln_eps, Rng& rng);

  Var<T> operator()(const Var<T>& x) const;
  std::size_t param_count() const { return down.param_count() + up.param_count() + ln.param_count(); }
  void collect(const std::string& prefix, ParameterSet<T>& params) const;
};

/// Per-layer transform f_l feeding the weighted sum.
template <typename T>
struct LAdapter {
  LAdapterConfig config;
  std::optional<Linear<T>> fc;
  std::optional<LayerNorm<T>> ln;
  std::optional<BottleneckAdapter<T>> skip;

  static LAdapter init(const LAdapterConfig& config, std::size_t d_model, double ln_eps, Rng& rng);

  Var<T> operator()(const Var<T>& h) const;
  std::size_t param_count() const;
  void collect(const std::string& prefix, ParameterSet<T>& params) const;
};

/// Softmax-normalised aggregation weights over free logits.
template <typename T>
struct LayerWeights {
  Var<T> logits;

  /// Zero logits, i.e. uniform weights.
  static LayerWeights init(std::size_t count);

  std::size_t size() const { return logits.value().numel(); }
  Var<T> weights() const { return softmax(logits, 0); }
  std::vector<double> normalized() const;
  /// sum_i w_i parts[i]. Throws ShapeError when counts differ.
  Var<T> aggregate(const std::vector<Var<T>>& parts) const;
  void collect(const std::string& prefix, ParameterSet<T>& params) const;
};

}  // namespace ladapt
