#pragma once

#include <cstddef>
#include <string>

#include "ladapt/autodiff/ops.hpp"

namespace ladapt {

struct BackboneConfig {
  std::size_t num_layers = 4;
  std::size_t d_model = 32;
  std::size_t num_heads = 2;
  std::size_t d_ffn = 64;
  std::size_t input_dim = 16;
  std::size_t max_seq_len = 64;
  Activation ffn_activation = Activation::GELU;
  double ln_eps = 1e-5;

  /// Desk-scale model used for every trained experiment.
  static BackboneConfig toy();
  /// WavLM Base dimensions: 12 layers, 768 wide, 8 heads, 3072 FFN, fed by
  /// 512-dimensional frontend features. Used for parameter accounting.
  static BackboneConfig wavlm_base();
  /// "toy" or "wavlm-base"; throws ConfigError otherwise.
  static BackboneConfig preset(const std::string& name);

  /// Throws ConfigError on non-positive sizes or heads not dividing d_model.
  void validate() const;

  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

/// Scalars in one encoder layer: attention projections, FFN, two LayerNorms.
std::size_t encoder_layer_param_count(const BackboneConfig& config);
/// Scalars in both LayerNorms of one encoder layer.
std::size_t encoder_layer_norm_param_count(const BackboneConfig& config);
std::size_t frontend_param_count(const BackboneConfig& config);
std::size_t backbone_param_count(const BackboneConfig& config);

}  // namespace ladapt
