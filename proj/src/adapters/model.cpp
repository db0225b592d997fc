#include "ladapt/adapters/model.hpp"

namespace ladapt {

namespace {
template <typename T, typename Module>
void unfreeze(const Module& module) {
  ParameterSet<T> params;
  module.collect("", params);
  params.unfreeze_all();
}
}  // namespace

template <typename T>
AdaptedModel<T>::AdaptedModel(Backbone<T> backbone, const AdaptationStrategy& strategy,
                              const HeadConfig& head, Rng& rng)
    : backbone_(std::move(backbone)), strategy_(strategy), head_config_(head) {
  const BackboneConfig& cfg = backbone_.config();
  const std::size_t L = cfg.num_layers, d = cfg.d_model;
  strategy_.validate(L);
  backbone_.parameters().freeze_all();

  if (strategy_.trains_encoder_norms()) {
    for (const auto& layer : backbone_.layers()) {
      ParameterSet<T> norms;
      layer.collect_norms("", norms);
      norms.unfreeze_all();
    }
  }
  for (std::size_t l : strategy_.fine_tuned_layers(L)) unfreeze<T>(backbone_.layers()[l]);

  e_adapters_.resize(L);
  conv_attn_.resize(L);
  conv_ffn_.resize(L);
  Rng e_rng = rng.split(1), conv_rng = rng.split(2), l_rng = rng.split(3), head_rng = rng.split(4);
  for (std::size_t l : strategy_.e_adapter_layers(L)) {
    Rng r = e_rng.split(l);
    e_adapters_[l] = BottleneckAdapter<T>::init(d, strategy_.bottleneck_dim, strategy_.activation, cfg.ln_eps, r);
    unfreeze<T>(*e_adapters_[l]);
  }
  for (std::size_t l : strategy_.conventional_layers(L)) {
    Rng r = conv_rng.split(l);
    conv_attn_[l] = BottleneckAdapter<T>::init(d, strategy_.bottleneck_dim, Activation::GELU, cfg.ln_eps, r);
    conv_ffn_[l] = BottleneckAdapter<T>::init(d, strategy_.bottleneck_dim, Activation::GELU, cfg.ln_eps, r);
    unfreeze<T>(*conv_attn_[l]);
    unfreeze<T>(*conv_ffn_[l]);
  }
  l_layers_ = strategy_.l_adapter_layers(L);
  for (std::size_t l : l_layers_) {
    Rng r = l_rng.split(l);
    l_adapters_.push_back(LAdapter<T>::init(strategy_.l_adapter, d, cfg.ln_eps, r));
    unfreeze<T>(l_adapters_.back());
  }
  if (strategy_.has_layer_weights()) {
    layer_weights_ = LayerWeights<T>::init(l_layers_.size());
    layer_weights_->logits.set_requires_grad(true);
  }

  const std::size_t in = head_input_dim(strategy_, cfg);
  if (head.kind == HeadKind::Ctc) {
    ctc_head_ = CtcHead<T>::init(in, head.outputs, head_rng);
    unfreeze<T>(*ctc_head_);
  } else {
    cls_head_ = ClsHead<T>::init(in, head.hidden_width(cfg), head.outputs, head_rng);
    unfreeze<T>(*cls_head_);
  }
}

template <typename T>
std::vector<LayerHooks<T>> AdaptedModel<T>::hooks() const {
  std::vector<LayerHooks<T>> hooks(backbone_.num_layers());
  bool any = false;
  for (std::size_t l = 0; l < hooks.size(); ++l) {
    if (conv_attn_[l]) {
      hooks[l].after_attention = [a = &*conv_attn_[l]](const Var<T>& x) { return (*a)(x); };
      hooks[l].after_ffn = [a = &*conv_ffn_[l]](const Var<T>& x) { return (*a)(x); };
      any = true;
    }
    if (e_adapters_[l]) {
      hooks[l].after_ffn = [a = &*e_adapters_[l]](const Var<T>& x) { return (*a)(x); };
      any = true;
    }
  }
  if (!any) hooks.clear();
  return hooks;
}

template <typename T>
ModelOutput<T> AdaptedModel<T>::forward(const Tensor<T>& features) const {
  const auto hook_list = hooks();
  const auto out = backbone_.forward(features, hook_list);
  ModelOutput<T> result;
  if (layer_weights_) {
    std::vector<Var<T>> adapted;
    for (std::size_t i = 0; i < l_layers_.size(); ++i) adapted.push_back(l_adapters_[i](out.hidden[l_layers_[i]]));
    result.h_star = layer_weights_->aggregate(adapted);
  } else {
    result.h_star = out.hidden.back();
  }
  if (ctc_head_) {
    result.logits = (*ctc_head_)(result.h_star);
  } else {
    auto cls = cls_head_->forward(result.h_star);
    result.logits = cls.logits;
    result.embedding = cls.embedding;
  }
  return result;
}

template <typename T>
Var<T> AdaptedModel<T>::loss(const ModelOutput<T>& out, std::span<const std::size_t> tokens,
                             std::size_t label) const {
  if (ctc_head_) return ctc_loss(out.logits, tokens);
  return cross_entropy(out.logits, label);
}

template <typename T>
ParameterSet<T> AdaptedModel<T>::parameters() const {
  ParameterSet<T> params;
  backbone_.collect("backbone.", params);
  for (std::size_t l = 0; l < e_adapters_.size(); ++l) {
    const std::string idx = std::to_string(l);
    if (e_adapters_[l]) e_adapters_[l]->collect("e_adapters." + idx + ".", params);
    if (conv_attn_[l]) conv_attn_[l]->collect("conv_adapters." + idx + ".attn.", params);
    if (conv_ffn_[l]) conv_ffn_[l]->collect("conv_adapters." + idx + ".ffn.", params);
  }
  for (std::size_t i = 0; i < l_layers_.size(); ++i)
    l_adapters_[i].collect("l_adapters." + std::to_string(l_layers_[i]) + ".", params);
  if (layer_weights_) layer_weights_->collect("layer_weights.", params);
  if (ctc_head_) ctc_head_->collect("head.", params);
  if (cls_head_) cls_head_->collect("head.", params);
  return params;
}

template <typename T>
std::vector<double> AdaptedModel<T>::layer_weights() const {
  if (!layer_weights_) throw ConfigError(strategy_.label() + " has no layer weights");
  return layer_weights_->normalized();
}

template <typename T>
ParamReport enumerate_params(const AdaptedModel<T>& model) {
  auto starts = [](const std::string& s, const char* p) { return s.rfind(p, 0) == 0; };
  ParamReport r;
  const ParameterSet<T> params = model.parameters();
  for (const auto& e : params.entries()) {
    const std::size_t n = e.var.value().numel();
    const bool on = e.var.requires_grad();
    const std::string& name = e.name;
    if (starts(name, "backbone.")) {
      r.backbone += n;
      if (!on) continue;
      const bool norm = name.find(".ln1.") != std::string::npos || name.find(".ln2.") != std::string::npos;
      if (norm && model.strategy().kind != StrategyKind::FineTuneTop) r.encoder_norms += n;
      else r.encoder_layers += n;
      continue;
    }
    // A frozen added module is left out here and surfaces as a mismatch.
    std::size_t* slot = nullptr;
    if (starts(name, "e_adapters.")) slot = &r.e_adapters;
    else if (starts(name, "conv_adapters.")) slot = &r.conventional_adapters;
    else if (starts(name, "l_adapters.")) slot = &r.l_adapters;
    else if (starts(name, "layer_weights.")) slot = &r.layer_weights;
    else if (starts(name, "head.")) slot = &r.head;
    else throw ConfigError("enumerate_params: unclassified parameter '" + name + "'");
    if (on) *slot += n;
  }
  return r;
}

template class AdaptedModel<float>;
template class AdaptedModel<double>;
template ParamReport enumerate_params(const AdaptedModel<float>&);
template ParamReport enumerate_params(const AdaptedModel<double>&);

}  // namespace ladapt
