#include "ladapt/backbone/config.hpp"

#include "ladapt/autodiff/errors.hpp"

namespace ladapt {

BackboneConfig BackboneConfig::toy() { return BackboneConfig{}; }

BackboneConfig BackboneConfig::wavlm_base() {
  BackboneConfig c;
  c.num_layers = 12;
  c.d_model = 768;
  c.num_heads = 8;
  c.d_ffn = 3072;
  c.input_dim = 512;
  c.max_seq_len = 4096;
  return c;
}

BackboneConfig BackboneConfig::preset(const std::string& name) {
  if (name == "toy") return toy();
  if (name == "wavlm-base") return wavlm_base();
  throw ConfigError("unknown backbone preset '" + name + "' (expected toy or wavlm-base)");
}

void BackboneConfig::validate() const {
  if (num_layers == 0 || d_model == 0 || num_heads == 0 || d_ffn == 0 || input_dim == 0 ||
      max_seq_len == 0) {
    throw ConfigError("backbone sizes must be positive");
  }
  if (d_model % num_heads != 0) {
    throw ConfigError("num_heads (" + std::to_string(num_heads) + ") must divide d_model (" +
                      std::to_string(d_model) + ")");
  }
  if (!(ln_eps > 0.0)) throw ConfigError("ln_eps must be positive");
}

std::size_t encoder_layer_norm_param_count(const BackboneConfig& c) { return 2 * 2 * c.d_model; }

std::size_t encoder_layer_param_count(const BackboneConfig& c) {
  const std::size_t attention = 4 * (c.d_model * c.d_model + c.d_model);
  const std::size_t ffn = c.d_model * c.d_ffn + c.d_ffn + c.d_ffn * c.d_model + c.d_model;
  return attention + ffn + encoder_layer_norm_param_count(c);
}

std::size_t frontend_param_count(const BackboneConfig& c) {
  return c.input_dim * c.d_model + c.d_model;
}

std::size_t backbone_param_count(const BackboneConfig& c) {
  return frontend_param_count(c) + c.num_layers * encoder_layer_param_count(c);
}

}  // namespace ladapt
