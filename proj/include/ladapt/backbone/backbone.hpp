#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ladapt/backbone/config.hpp"
#include "ladapt/backbone/layers.hpp"

namespace ladapt {

template <typename T>
using SublayerTransform = std::function<Var<T>(const Var<T>&)>;

/// Optional transforms applied to a sublayer's output before its residual
/// add. Empty functions leave the plain transformer layer untouched.
template <typename T>
struct LayerHooks {
  SublayerTransform<T> after_attention;
  SublayerTransform<T> after_ffn;
};

template <typename T>
struct EncoderLayer {
  Linear<T> query, key, value, out;
  Linear<T> fc1, fc2;
  LayerNorm<T> ln1, ln2;

  static EncoderLayer init(const BackboneConfig& config, Rng& rng);
  void collect(const std::string& prefix, ParameterSet<T>& params) const;
  /// Both LayerNorms, as "<prefix>ln1.gamma" etc.
  void collect_norms(const std::string& prefix, ParameterSet<T>& params) const;
};

/// Post-LN encoder layer:
///   x   = LN1(h + hook_attn(MHSA(h)))
///   out = LN2(x + hook_ffn(FFN(x)))
template <typename T>
Var<T> encoder_layer_forward(const EncoderLayer<T>& layer, const Var<T>& h,
                             const BackboneConfig& config, const LayerHooks<T>* hooks = nullptr);

/// Sinusoidal absolute positions: sin on even columns, cos on odd columns.
template <typename T>
Tensor<T> sinusoidal_positions(std::size_t frames, std::size_t width);

template <typename T>
struct BackboneOutput {
  Var<T> embedded;           // frontend output
  std::vector<Var<T>> hidden;  // h_1 ... h_L
};

/// Transformer encoder with a linear frontend. Parameters are created
/// frozen; callers decide what trains.
template <typename T>
class Backbone {
 public:
  Backbone(const BackboneConfig& config, Rng& rng);
  /// Fresh frozen parameters holding values; every name must be present.
  static Backbone from_values(const BackboneConfig& config, const ParameterValues& values);
  /// Independent frozen copy; the two models share no parameter nodes.
  Backbone deep_copy() const;

  const BackboneConfig& config() const { return config_; }
  std::size_t num_layers() const { return layers_.size(); }
  const std::vector<EncoderLayer<T>>& layers() const { return layers_; }
  const Linear<T>& frontend() const { return frontend_; }

  /// features [T x input_dim] -> projection + positions [T x d_model].
  /// Throws ShapeError for T == 0 or T > max_seq_len.
  Var<T> frontend_forward(const Tensor<T>& features) const;
  /// Same, with the projected rows in `masked` replaced by `mask_embedding`
  /// before positions are added.
  Var<T> frontend_forward(const Tensor<T>& features, std::span<const std::size_t> masked,
                          const Var<T>& mask_embedding) const;

  /// hooks is empty or holds one entry per layer.
  BackboneOutput<T> forward(const Tensor<T>& features,
                            std::span<const LayerHooks<T>> hooks = {}) const;
  std::vector<Var<T>> forward_from_embedded(const Var<T>& embedded,
                                            std::span<const LayerHooks<T>> hooks = {}) const;

  /// Names follow "frontend.proj.weight", "layers.3.ffn.fc1.weight", ...
  void collect(const std::string& prefix, ParameterSet<T>& params) const;
  ParameterSet<T> parameters() const;

 private:
  BackboneConfig config_;
  Linear<T> frontend_;
  std::vector<EncoderLayer<T>> layers_;
};

}  // namespace ladapt
