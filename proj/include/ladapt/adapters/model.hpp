#pragma once

#include <optional>
#include <vector>

#include "ladapt/adapters/strategy.hpp"
#include "ladapt/backbone/backbone.hpp"
#include "ladapt/heads/heads.hpp"

namespace ladapt {

template <typename T>
struct ModelOutput {
  Var<T> h_star;     // head input
  Var<T> logits;     // [T x (V+1)] for CTC, [C] for classification
  Var<T> embedding;  // pooled embedding; classification only
};

/// Backbone plus the adapters, layer weights and head a strategy calls for.
/// Owns its backbone; trainability is fixed at construction.
template <typename T>
class AdaptedModel {
 public:
  /// Frontend always frozen; head always trainable.
  AdaptedModel(Backbone<T> backbone, const AdaptationStrategy& strategy, const HeadConfig& head, Rng& rng);

  const Backbone<T>& backbone() const { return backbone_; }
  const AdaptationStrategy& strategy() const { return strategy_; }
  const HeadConfig& head_config() const { return head_config_; }

  ModelOutput<T> forward(const Tensor<T>& features) const;
  /// CTC loss against a token sequence or cross-entropy against a class.
  Var<T> loss(const ModelOutput<T>& out, std::span<const std::size_t> tokens, std::size_t label) const;

  /// Every parameter, named "backbone.*", "e_adapters.<l>.*",
  /// "conv_adapters.<l>.{attn,ffn}.*", "l_adapters.<l>.*",
  /// "layer_weights.logits", "head.*".
  ParameterSet<T> parameters() const;

  bool has_layer_weights() const { return layer_weights_.has_value(); }
  /// Normalised weights, bottom to top over the attached layers.
  std::vector<double> layer_weights() const;
  /// Backbone layer index of each weight.
  const std::vector<std::size_t>& weighted_layers() const { return l_layers_; }

  const std::optional<BottleneckAdapter<T>>& e_adapter(std::size_t layer) const { return e_adapters_.at(layer); }
  std::optional<BottleneckAdapter<T>>& e_adapter(std::size_t layer) { return e_adapters_.at(layer); }

 private:
  std::vector<LayerHooks<T>> hooks() const;

  Backbone<T> backbone_;
  AdaptationStrategy strategy_;
  HeadConfig head_config_;
  std::vector<std::optional<BottleneckAdapter<T>>> e_adapters_;
  std::vector<std::optional<BottleneckAdapter<T>>> conv_attn_, conv_ffn_;
  std::vector<std::size_t> l_layers_;
  std::vector<LAdapter<T>> l_adapters_;
  std::optional<LayerWeights<T>> layer_weights_;
  std::optional<CtcHead<T>> ctc_head_;
  std::optional<ClsHead<T>> cls_head_;
};

/// Attaches the strategy's modules to a frozen backbone and unfreezes
/// exactly the parameters it trains.
template <typename T>
AdaptedModel<T> apply_strategy(Backbone<T> backbone, const AdaptationStrategy& strategy,
                               const HeadConfig& head, Rng& rng) {
  return AdaptedModel<T>(std::move(backbone), strategy, head, rng);
}

/// Counts trainable scalars by walking an instantiated model's parameter
/// names; independent of the closed-form formulas.
template <typename T>
ParamReport enumerate_params(const AdaptedModel<T>& model);

}  // namespace ladapt
