#pragma once

#include <string>

#include "ladapt/adapters/adapters.hpp"

namespace ladapt {

enum class StrategyKind { FineTuneTop, Conventional, Proposed, LAdaptersOnly, EAdaptersOnly };

std::string to_string(StrategyKind kind);
StrategyKind strategy_kind_from_string(const std::string& name);

/// Layers are numbered 0 (bottom) to L-1 (top) throughout.
struct AdaptationStrategy {
  StrategyKind kind = StrategyKind::Proposed;
  std::size_t k = 0;  // Proposed: L-adapters on the top k layers
  std::size_t l = 0;  // FineTuneTop / Conventional: top l layers; Proposed: E-adapter count
  LAdapterConfig l_adapter;
  std::size_t bottleneck_dim = 256;  // E-adapters and conventional adapters
  Activation activation = Activation::GELU;  // E-adapters

  static AdaptationStrategy fine_tune_top(std::size_t l);
  static AdaptationStrategy conventional(std::size_t l);
  static AdaptationStrategy proposed(std::size_t k, std::size_t l);
  static AdaptationStrategy l_adapters_only();
  static AdaptationStrategy e_adapters_only();

  /// Throws ConfigError when k or l is out of range for num_layers.
  void validate(std::size_t num_layers) const;
  /// Short identifier such as "proposed(k=4,l=3)".
  std::string label() const;

  bool has_layer_weights() const;
  bool trains_encoder_norms() const;
  /// Layers feeding the weighted sum, bottom to top. Empty when the head
  /// reads the top layer directly.
  std::vector<std::size_t> l_adapter_layers(std::size_t num_layers) const;
  std::vector<std::size_t> e_adapter_layers(std::size_t num_layers) const;
  std::vector<std::size_t> conventional_layers(std::size_t num_layers) const;
  std::vector<std::size_t> fine_tuned_layers(std::size_t num_layers) const;

  friend bool operator==(const AdaptationStrategy&, const AdaptationStrategy&) = default;
};

/// Width of h*, the head input.
std::size_t head_input_dim(const AdaptationStrategy& strategy, const BackboneConfig& config);

enum class HeadKind { Ctc, Classification };

struct HeadConfig {
  HeadKind kind = HeadKind::Classification;
  std::size_t outputs = 2;  // vocabulary size (blank excluded) or class count
  std::size_t hidden = 0;   // classification hidden width; 0 means d_model

  std::size_t hidden_width(const BackboneConfig& config) const { return hidden ? hidden : config.d_model; }
};

std::size_t head_param_count(const HeadConfig& head, std::size_t input_dim, const BackboneConfig& config);

/// Trainable scalars by component, plus the frozen backbone size.
struct ParamReport {
  std::size_t l_adapters = 0;
  std::size_t e_adapters = 0;
  std::size_t conventional_adapters = 0;
  std::size_t layer_weights = 0;
  std::size_t encoder_norms = 0;
  std::size_t encoder_layers = 0;  // fully fine-tuned layers, norms included
  std::size_t head = 0;
  std::size_t backbone = 0;        // every backbone scalar, trainable or not

  std::size_t trainable() const;
  /// Backbone plus every added module.
  std::size_t total() const;
  double ratio() const;
  /// trainable / backbone.
  double ratio_to_backbone() const;
};

/// Closed-form accounting; no model is built. head may be null.
ParamReport count_learnable_params(const AdaptationStrategy& strategy, const BackboneConfig& config,
                                   const HeadConfig* head = nullptr);

/// Parameters one L-adapter variant adds over all L layers:
/// the aggregation weights for Weight, the per-layer transforms otherwise.
std::size_t ablation_param_count(const LAdapterConfig& config, const BackboneConfig& backbone);
/// Counts below 10000 print as integers, larger ones as millions with two
/// decimals ("0.02M", "4.74M").
std::string format_param_count(std::size_t count);

}  // namespace ladapt
