#include "ladapt/adapters/adapters.hpp"

namespace ladapt {

std::string to_string(LAdapterVariant variant) {
  switch (variant) {
    case LAdapterVariant::Weight: return "Weight";
    case LAdapterVariant::LN: return "LN";
    case LAdapterVariant::ActLN: return "Act+LN";
    case LAdapterVariant::FC: return "FC";
    case LAdapterVariant::FCAct: return "FC+Act";
    case LAdapterVariant::FCLN: return "FC+LN";
    case LAdapterVariant::Base: return "Base";
    case LAdapterVariant::Skip: return "Skip";
  }
  return "?";
}

const std::vector<LAdapterVariant>& all_l_adapter_variants() {
  static const std::vector<LAdapterVariant> all{
      LAdapterVariant::Weight, LAdapterVariant::LN,   LAdapterVariant::ActLN, LAdapterVariant::FC,
      LAdapterVariant::FCAct,  LAdapterVariant::FCLN, LAdapterVariant::Base,  LAdapterVariant::Skip};
  return all;
}

LAdapterVariant l_adapter_variant_from_string(const std::string& name) {
  for (auto v : all_l_adapter_variants())
    if (to_string(v) == name) return v;
  if (name == "ActLN") return LAdapterVariant::ActLN;
  if (name == "FCAct") return LAdapterVariant::FCAct;
  if (name == "FCLN") return LAdapterVariant::FCLN;
  throw ConfigError("unknown L-adapter variant '" + name + "'");
}

std::size_t l_adapter_output_dim(const LAdapterConfig& config, std::size_t d_model) {
  switch (config.variant) {
    case LAdapterVariant::Weight:
    case LAdapterVariant::LN:
    case LAdapterVariant::ActLN:
    case LAdapterVariant::Skip: return d_model;
    default: return config.embed_dim;
  }
}

std::size_t bottleneck_param_count(std::size_t d_model, std::size_t bottleneck) {
  return d_model * bottleneck + bottleneck + bottleneck * d_model + d_model + 2 * d_model;
}

std::size_t l_adapter_param_count(const LAdapterConfig& config, std::size_t d_model) {
  const std::size_t e = config.embed_dim;
  switch (config.variant) {
    case LAdapterVariant::Weight: return 0;
    case LAdapterVariant::LN:
    case LAdapterVariant::ActLN: return 2 * d_model;
    case LAdapterVariant::FC:
    case LAdapterVariant::FCAct: return d_model * e + e;
    case LAdapterVariant::FCLN:
    case LAdapterVariant::Base: return d_model * e + e + 2 * e;
    case LAdapterVariant::Skip: return bottleneck_param_count(d_model, config.skip_bottleneck);
  }
  return 0;
}

template <typename T>
BottleneckAdapter<T> BottleneckAdapter<T>::init(std::size_t d_model, std::size_t bottleneck,
                                                Activation activation, double ln_eps, Rng& rng) {
  if (bottleneck == 0 || bottleneck == d_model) {
    throw ConfigError("bottleneck adapter: width " + std::to_string(bottleneck) +
                      " must be positive and differ from d_model " + std::to_string(d_model));
  }
  BottleneckAdapter a;
  a.down = Linear<T>::uniform(d_model, bottleneck, kDownInitRange, rng);
  a.up = Linear<T>::zeros(bottleneck, d_model);
  a.ln = LayerNorm<T>::init(d_model, ln_eps);
  a.activation = activation;
  return a;
}

template <typename T>
Var<T> BottleneckAdapter<T>::operator()(const Var<T>& x) const {
  return add(x, ln(up(activate(down(x), activation))));
}

template <typename T>
void BottleneckAdapter<T>::collect(const std::string& prefix, ParameterSet<T>& params) const {
  down.collect(prefix + "down.", params);
  up.collect(prefix + "up.", params);
  ln.collect(prefix + "ln.", params);
}

template <typename T>
LAdapter<T> LAdapter<T>::init(const LAdapterConfig& config, std::size_t d_model, double ln_eps, Rng& rng) {
  if (config.embed_dim == 0) throw ConfigError("L-adapter: embed_dim must be positive");
  LAdapter a;
  a.config = config;
  switch (config.variant) {
    case LAdapterVariant::Weight: break;
    case LAdapterVariant::LN:
    case LAdapterVariant::ActLN: a.ln = LayerNorm<T>::init(d_model, ln_eps); break;
    case LAdapterVariant::FC:
    case LAdapterVariant::FCAct: a.fc = Linear<T>::init(d_model, config.embed_dim, rng); break;
    case LAdapterVariant::FCLN:
    case LAdapterVariant::Base:
      a.fc = Linear<T>::init(d_model, config.embed_dim, rng);
      a.ln = LayerNorm<T>::init(config.embed_dim, ln_eps);
      break;
    case LAdapterVariant::Skip:
      a.skip = BottleneckAdapter<T>::init(d_model, config.skip_bottleneck, config.activation, ln_eps, rng);
      break;
  }
  return a;
}

template <typename T>
Var<T> LAdapter<T>::operator()(const Var<T>& h) const {
  const Activation act = config.activation;
  switch (config.variant) {
    case LAdapterVariant::Weight: return h;
    case LAdapterVariant::LN: return (*ln)(h);
    case LAdapterVariant::ActLN: return (*ln)(activate(h, act));
    case LAdapterVariant::FC: return (*fc)(h);
    case LAdapterVariant::FCAct: return activate((*fc)(h), act);
    case LAdapterVariant::FCLN: return (*ln)((*fc)(h));
    case LAdapterVariant::Base: return (*ln)(activate((*fc)(h), act));
    case LAdapterVariant::Skip: return (*skip)(h);
  }
  return h;
}

template <typename T>
std::size_t LAdapter<T>::param_count() const {
  std::size_t n = 0;
  if (fc) n += fc->param_count();
  if (ln) n += ln->param_count();
  if (skip) n += skip->param_count();
  return n;
}

template <typename T>
void LAdapter<T>::collect(const std::string& prefix, ParameterSet<T>& params) const {
  if (fc) fc->collect(prefix + "fc.", params);
  if (ln) ln->collect(prefix + "ln.", params);
  if (skip) skip->collect(prefix + "skip.", params);
}

template <typename T>
LayerWeights<T> LayerWeights<T>::init(std::size_t count) {
  if (count == 0) throw ConfigError("layer weights: need at least one layer");
  return LayerWeights{Var<T>::leaf(Tensor<T>(Shape{count}, T{0}), false)};
}

template <typename T>
std::vector<double> LayerWeights<T>::normalized() const {
  NoGradGuard guard;
  const auto w = weights().value();
  return std::vector<double>(w.data().begin(), w.data().end());
}

template <typename T>
Var<T> LayerWeights<T>::aggregate(const std::vector<Var<T>>& parts) const {
  if (parts.size() != size()) {
    throw ShapeError("layer weights: " + std::to_string(parts.size()) + " representations for " +
                     std::to_string(size()) + " weights");
  }
  return weighted_sum(parts, weights());
}

template <typename T>
void LayerWeights<T>::collect(const std::string& prefix, ParameterSet<T>& params) const {
  params.add(prefix + "logits", logits);
}

template struct BottleneckAdapter<float>;
template struct BottleneckAdapter<double>;
template struct LAdapter<float>;
template struct LAdapter<double>;
template struct LayerWeights<float>;
template struct LayerWeights<double>;

}  // namespace ladapt
