#include "ladapt/adapters/strategy.hpp"

#include <cstdio>

namespace ladapt {

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::FineTuneTop: return "finetune";
    case StrategyKind::Conventional: return "conventional";
    case StrategyKind::Proposed: return "proposed";
    case StrategyKind::LAdaptersOnly: return "l-only";
    case StrategyKind::EAdaptersOnly: return "e-only";
  }
  return "?";
}

StrategyKind strategy_kind_from_string(const std::string& name) {
  for (auto k : {StrategyKind::FineTuneTop, StrategyKind::Conventional, StrategyKind::Proposed,
                 StrategyKind::LAdaptersOnly, StrategyKind::EAdaptersOnly})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown strategy '" + name + "'");
}

AdaptationStrategy AdaptationStrategy::fine_tune_top(std::size_t l) {
  AdaptationStrategy s;
  s.kind = StrategyKind::FineTuneTop;
  s.l = l;
  return s;
}

AdaptationStrategy AdaptationStrategy::conventional(std::size_t l) {
  AdaptationStrategy s;
  s.kind = StrategyKind::Conventional;
  s.l = l;
  return s;
}

AdaptationStrategy AdaptationStrategy::proposed(std::size_t k, std::size_t l) {
  AdaptationStrategy s;
  s.kind = StrategyKind::Proposed;
  s.k = k;
  s.l = l;
  return s;
}

AdaptationStrategy AdaptationStrategy::l_adapters_only() {
  AdaptationStrategy s;
  s.kind = StrategyKind::LAdaptersOnly;
  return s;
}

AdaptationStrategy AdaptationStrategy::e_adapters_only() {
  AdaptationStrategy s;
  s.kind = StrategyKind::EAdaptersOnly;
  return s;
}

void AdaptationStrategy::validate(std::size_t num_layers) const {
  const std::string L = std::to_string(num_layers);
  switch (kind) {
    case StrategyKind::FineTuneTop:
    case StrategyKind::Conventional:
      if (l > num_layers) throw ConfigError(label() + ": l must be at most " + L);
      break;
    case StrategyKind::Proposed:
      if (k < 1 || k > num_layers) throw ConfigError(label() + ": k must be in 1.." + L);
      if (l > num_layers - 1) throw ConfigError(label() + ": l must be in 0.." + std::to_string(num_layers - 1));
      break;
    default: break;
  }
}

std::string AdaptationStrategy::label() const {
  switch (kind) {
    case StrategyKind::FineTuneTop:
    case StrategyKind::Conventional: return to_string(kind) + "(l=" + std::to_string(l) + ")";
    case StrategyKind::Proposed:
      return "proposed(k=" + std::to_string(k) + ",l=" + std::to_string(l) + ")";
    default: return to_string(kind);
  }
}

bool AdaptationStrategy::has_layer_weights() const {
  return kind == StrategyKind::Proposed || kind == StrategyKind::LAdaptersOnly;
}

bool AdaptationStrategy::trains_encoder_norms() const { return kind != StrategyKind::FineTuneTop; }

namespace {
std::vector<std::size_t> top_layers(std::size_t count, std::size_t num_layers) {
  std::vector<std::size_t> out;
  for (std::size_t i = num_layers - count; i < num_layers; ++i) out.push_back(i);
  return out;
}
}  // namespace

std::vector<std::size_t> AdaptationStrategy::l_adapter_layers(std::size_t num_layers) const {
  if (kind == StrategyKind::Proposed) return top_layers(k, num_layers);
  if (kind == StrategyKind::LAdaptersOnly) return top_layers(num_layers, num_layers);
  return {};
}

std::vector<std::size_t> AdaptationStrategy::e_adapter_layers(std::size_t num_layers) const {
  if (kind == StrategyKind::EAdaptersOnly) return top_layers(num_layers, num_layers);
  if (kind != StrategyKind::Proposed) return {};
  // l layers counted down from the second layer from the top.
  auto layers = top_layers(l + 1, num_layers);
  layers.pop_back();
  return layers;
}

std::vector<std::size_t> AdaptationStrategy::conventional_layers(std::size_t num_layers) const {
  return kind == StrategyKind::Conventional ? top_layers(l, num_layers) : std::vector<std::size_t>{};
}

std::vector<std::size_t> AdaptationStrategy::fine_tuned_layers(std::size_t num_layers) const {
  return kind == StrategyKind::FineTuneTop ? top_layers(l, num_layers) : std::vector<std::size_t>{};
}

std::size_t head_input_dim(const AdaptationStrategy& strategy, const BackboneConfig& config) {
  return strategy.has_layer_weights() ? l_adapter_output_dim(strategy.l_adapter, config.d_model)
                                      : config.d_model;
}

std::size_t head_param_count(const HeadConfig& head, std::size_t input_dim, const BackboneConfig& config) {
  if (head.kind == HeadKind::Ctc) return input_dim * (head.outputs + 1) + head.outputs + 1;
  const std::size_t h = head.hidden_width(config);
  return input_dim * h + h + h * head.outputs + head.outputs;
}

std::size_t ParamReport::trainable() const {
  return l_adapters + e_adapters + conventional_adapters + layer_weights + encoder_norms + encoder_layers + head;
}

std::size_t ParamReport::total() const {
  return backbone + l_adapters + e_adapters + conventional_adapters + layer_weights + head;
}

double ParamReport::ratio() const { return static_cast<double>(trainable()) / static_cast<double>(total()); }

double ParamReport::ratio_to_backbone() const {
  return static_cast<double>(trainable()) / static_cast<double>(backbone);
}

ParamReport count_learnable_params(const AdaptationStrategy& strategy, const BackboneConfig& config,
                                   const HeadConfig* head) {
  config.validate();
  strategy.validate(config.num_layers);
  const std::size_t L = config.num_layers, d = config.d_model;
  ParamReport r;
  r.backbone = backbone_param_count(config);
  const std::size_t attached = strategy.l_adapter_layers(L).size();
  r.l_adapters = attached * l_adapter_param_count(strategy.l_adapter, d);
  if (strategy.has_layer_weights()) r.layer_weights = attached;
  r.e_adapters = strategy.e_adapter_layers(L).size() * bottleneck_param_count(d, strategy.bottleneck_dim);
  r.conventional_adapters =
      2 * strategy.conventional_layers(L).size() * bottleneck_param_count(d, strategy.bottleneck_dim);
  if (strategy.trains_encoder_norms()) r.encoder_norms = L * encoder_layer_norm_param_count(config);
  r.encoder_layers = strategy.fine_tuned_layers(L).size() * encoder_layer_param_count(config);
  if (head) r.head = head_param_count(*head, head_input_dim(strategy, config), config);
  return r;
}

std::size_t ablation_param_count(const LAdapterConfig& config, const BackboneConfig& backbone) {
  if (config.variant == LAdapterVariant::Weight) return backbone.num_layers;
  return backbone.num_layers * l_adapter_param_count(config, backbone.d_model);
}

std::string format_param_count(std::size_t count) {
  if (count < 10000) return std::to_string(count);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2fM", static_cast<double>(count) / 1e6);
  return buf;
}

}  // namespace ladapt
