#include "ladapt/backbone/backbone.hpp"

#include <cmath>

namespace ladapt {

template <typename T>
EncoderLayer<T> EncoderLayer<T>::init(const BackboneConfig& c, Rng& rng) {
  EncoderLayer layer;
  layer.query = Linear<T>::init(c.d_model, c.d_model, rng);
  layer.key = Linear<T>::init(c.d_model, c.d_model, rng);
  layer.value = Linear<T>::init(c.d_model, c.d_model, rng);
  layer.out = Linear<T>::init(c.d_model, c.d_model, rng);
  layer.fc1 = Linear<T>::init(c.d_model, c.d_ffn, rng);
  layer.fc2 = Linear<T>::init(c.d_ffn, c.d_model, rng);
  layer.ln1 = LayerNorm<T>::init(c.d_model, c.ln_eps);
  layer.ln2 = LayerNorm<T>::init(c.d_model, c.ln_eps);
  return layer;
}

template <typename T>
void EncoderLayer<T>::collect(const std::string& prefix, ParameterSet<T>& params) const {
  query.collect(prefix + "attn.query.", params);
  key.collect(prefix + "attn.key.", params);
  value.collect(prefix + "attn.value.", params);
  out.collect(prefix + "attn.out.", params);
  fc1.collect(prefix + "ffn.fc1.", params);
  fc2.collect(prefix + "ffn.fc2.", params);
  collect_norms(prefix, params);
}

template <typename T>
void EncoderLayer<T>::collect_norms(const std::string& prefix, ParameterSet<T>& params) const {
  ln1.collect(prefix + "ln1.", params);
  ln2.collect(prefix + "ln2.", params);
}

template <typename T>
Var<T> encoder_layer_forward(const EncoderLayer<T>& layer, const Var<T>& h,
                             const BackboneConfig& config, const LayerHooks<T>* hooks) {
  Var<T> attn = layer.out(
      multi_head_attention(layer.query(h), layer.key(h), layer.value(h), config.num_heads));
  if (hooks && hooks->after_attention) attn = hooks->after_attention(attn);
  Var<T> x = layer.ln1(add(h, attn));
  Var<T> ffn = layer.fc2(activate(layer.fc1(x), config.ffn_activation));
  if (hooks && hooks->after_ffn) ffn = hooks->after_ffn(ffn);
  return layer.ln2(add(x, ffn));
}

template <typename T>
Tensor<T> sinusoidal_positions(std::size_t frames, std::size_t width) {
  Tensor<T> pe(Shape{frames, width});
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t j = 0; j < width; ++j) {
      const double rate = std::pow(10000.0, -static_cast<double>(j - j % 2) / static_cast<double>(width));
      const double angle = static_cast<double>(t) * rate;
      pe.at(t, j) = static_cast<T>(j % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

template <typename T>
Backbone<T>::Backbone(const BackboneConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  Rng frontend_rng = rng.split(0);
  frontend_ = Linear<T>::init(config_.input_dim, config_.d_model, frontend_rng);
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    Rng layer_rng = rng.split(l + 1);
    layers_.push_back(EncoderLayer<T>::init(config_, layer_rng));
  }
}

template <typename T>
Backbone<T> Backbone<T>::from_values(const BackboneConfig& config, const ParameterValues& values) {
  Rng rng(0);
  Backbone<T> out(config, rng);
  ParameterSet<T> params = out.parameters();
  load(params, values, true);
  return out;
}

template <typename T>
Backbone<T> Backbone<T>::deep_copy() const {
  return from_values(config_, snapshot(parameters()));
}

template <typename T>
Var<T> Backbone<T>::frontend_forward(const Tensor<T>& features) const {
  return frontend_forward(features, {}, Var<T>{});
}

template <typename T>
Var<T> Backbone<T>::frontend_forward(const Tensor<T>& features, std::span<const std::size_t> masked,
                                     const Var<T>& mask_embedding) const {
  if (features.rank() != 2 || features.cols() != config_.input_dim) {
    throw ShapeError("frontend: expected [T x " + std::to_string(config_.input_dim) + "], got " +
                     shape_str(features.shape()));
  }
  const std::size_t frames = features.rows();
  if (frames == 0) throw ShapeError("frontend: empty sequence");
  if (frames > config_.max_seq_len) {
    throw ShapeError("frontend: sequence length " + std::to_string(frames) + " exceeds max_seq_len " +
                     std::to_string(config_.max_seq_len));
  }
  Var<T> projected = frontend_(Var<T>::constant(features));
  if (!masked.empty()) projected = replace_rows(projected, masked, mask_embedding);
  return add(projected, Var<T>::constant(sinusoidal_positions<T>(frames, config_.d_model)));
}

template <typename T>
std::vector<Var<T>> Backbone<T>::forward_from_embedded(const Var<T>& embedded,
                                                       std::span<const LayerHooks<T>> hooks) const {
  if (!hooks.empty() && hooks.size() != layers_.size()) {
    throw ShapeError("backbone: " + std::to_string(hooks.size()) + " hook sets for " +
                     std::to_string(layers_.size()) + " layers");
  }
  std::vector<Var<T>> hidden;
  hidden.reserve(layers_.size());
  Var<T> h = embedded;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = encoder_layer_forward(layers_[l], h, config_, hooks.empty() ? nullptr : &hooks[l]);
    hidden.push_back(h);
  }
  return hidden;
}

template <typename T>
BackboneOutput<T> Backbone<T>::forward(const Tensor<T>& features,
                                       std::span<const LayerHooks<T>> hooks) const {
  BackboneOutput<T> out;
  out.embedded = frontend_forward(features);
  out.hidden = forward_from_embedded(out.embedded, hooks);
  return out;
}

template <typename T>
void Backbone<T>::collect(const std::string& prefix, ParameterSet<T>& params) const {
  frontend_.collect(prefix + "frontend.proj.", params);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].collect(prefix + "layers." + std::to_string(l) + ".", params);
  }
}

template <typename T>
ParameterSet<T> Backbone<T>::parameters() const {
  ParameterSet<T> params;
  collect("", params);
  return params;
}

template struct EncoderLayer<float>;
template struct EncoderLayer<double>;
template class Backbone<float>;
template class Backbone<double>;
template Var<float> encoder_layer_forward(const EncoderLayer<float>&, const Var<float>&,
                                          const BackboneConfig&, const LayerHooks<float>*);
template Var<double> encoder_layer_forward(const EncoderLayer<double>&, const Var<double>&,
                                           const BackboneConfig&, const LayerHooks<double>*);
template Tensor<float> sinusoidal_positions(std::size_t, std::size_t);
template Tensor<double> sinusoidal_positions(std::size_t, std::size_t);

}  // namespace ladapt
