#include "ladapt/backbone/pretrain.hpp"

#include "ladapt/autodiff/adam.hpp"

namespace ladapt {

template <typename T>
MaskedPredictionHead<T> make_masked_prediction_head(const BackboneConfig& config, Rng& rng) {
  Tensor<T> mask(Shape{config.d_model});
  for (auto& v : mask.data()) v = static_cast<T>(0.1 * rng.normal());
  MaskedPredictionHead<T> head;
  head.mask_embedding = Var<T>::leaf(std::move(mask), true);
  head.reconstruct = Linear<T>::init(config.d_model, config.input_dim, rng);
  head.reconstruct.weight.set_requires_grad(true);
  head.reconstruct.bias.set_requires_grad(true);
  return head;
}

std::vector<std::size_t> sample_mask(std::size_t frames, double p, Rng& rng) {
  std::vector<std::size_t> rows;
  for (std::size_t t = 0; t < frames; ++t)
    if (rng.uniform() < p) rows.push_back(t);
  return rows;
}

template <typename T>
Var<T> masked_frame_loss(const Backbone<T>& backbone, const MaskedPredictionHead<T>& head,
                         const Tensor<T>& features, std::span<const std::size_t> masked,
                         ReconstructionTarget target) {
  if (masked.empty()) return scale(sum(head.mask_embedding), T{0});
  Var<T> embedded = backbone.frontend_forward(features, masked, head.mask_embedding);
  Var<T> top = backbone.forward_from_embedded(embedded).back();
  Var<T> pred = head.reconstruct(select_rows(top, masked));

  const std::size_t frames = features.rows(), dim = features.cols();
  std::vector<T> offset(dim, T{0});
  if (target == ReconstructionTarget::UtteranceNormalized) {
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t j = 0; j < dim; ++j) offset[j] += features.at(t, j);
    for (auto& v : offset) v /= static_cast<T>(frames);
  }
  Tensor<T> goal(Shape{masked.size(), dim});
  for (std::size_t i = 0; i < masked.size(); ++i)
    for (std::size_t j = 0; j < dim; ++j) goal.at(i, j) = features.at(masked[i], j) - offset[j];
  return mse(pred, goal);
}

namespace {

double heldout_loss(const Backbone<float>& backbone, const MaskedPredictionHead<float>& head,
                    std::span<const Tensor<float>> heldout, const PretrainConfig& config) {
  if (heldout.empty()) return 0.0;
  NoGradGuard guard;
  Rng base = Rng(config.seed).split(0xE7A1);
  double total = 0.0;
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    Rng rng = base.split(i);
    const auto masked = sample_mask(heldout[i].rows(), config.mask_prob, rng);
    total += masked_frame_loss(backbone, head, heldout[i], masked, config.target).value().item();
  }
  return total / static_cast<double>(heldout.size());
}

}  // namespace

PretrainResult pretrain_toy(Backbone<float>& backbone, std::span<const Tensor<float>> corpus,
                            std::span<const Tensor<float>> heldout, const PretrainConfig& config) {
  if (corpus.empty()) throw ConfigError("pretrain: empty corpus");
  if (config.batch_size == 0) throw ConfigError("pretrain: batch_size must be positive");
  Rng rng(config.seed);
  Rng head_rng = rng.split(1);
  Rng order_rng = rng.split(2);
  Rng mask_rng = rng.split(3);
  auto head = make_masked_prediction_head<float>(backbone.config(), head_rng);

  ParameterSet<float> params = backbone.parameters();
  std::vector<Var<float>> trainable;
  for (auto& e : params.entries()) {
    Var<float> v = e.var;
    v.set_requires_grad(true);
    trainable.push_back(v);
  }
  trainable.push_back(head.mask_embedding);
  trainable.push_back(head.reconstruct.weight);
  trainable.push_back(head.reconstruct.bias);

  PretrainResult result;
  result.heldout_loss_before = heldout_loss(backbone, head, heldout, config);

  Adam<float> adam(trainable, AdamConfig{.lr = config.lr});
  for (std::size_t step = 0; step < config.steps; ++step) {
    adam.zero_grad();
    std::vector<Var<float>> losses;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const Tensor<float>& x = corpus[order_rng.below(corpus.size())];
      const auto masked = sample_mask(x.rows(), config.mask_prob, mask_rng);
      losses.push_back(masked_frame_loss(backbone, head, x, masked, config.target));
    }
    Tensor<float> ones(Shape{losses.size()}, 1.0f / static_cast<float>(losses.size()));
    Var<float> loss = weighted_sum(losses, Var<float>::constant(std::move(ones)));
    result.trajectory.push_back(loss.value().item());
    backward(loss);
    adam.step();
  }

  params.freeze_all();
  result.heldout_loss_after = heldout_loss(backbone, head, heldout, config);
  return result;
}

template MaskedPredictionHead<float> make_masked_prediction_head(const BackboneConfig&, Rng&);
template MaskedPredictionHead<double> make_masked_prediction_head(const BackboneConfig&, Rng&);
template Var<float> masked_frame_loss(const Backbone<float>&, const MaskedPredictionHead<float>&,
                                      const Tensor<float>&, std::span<const std::size_t>,
                                      ReconstructionTarget);
template Var<double> masked_frame_loss(const Backbone<double>&, const MaskedPredictionHead<double>&,
                                       const Tensor<double>&, std::span<const std::size_t>,
                                       ReconstructionTarget);

}  // namespace ladapt
