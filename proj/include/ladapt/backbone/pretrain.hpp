#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ladapt/backbone/backbone.hpp"

namespace ladapt {

enum class ReconstructionTarget {
  RawFrame,              // the frame exactly as fed to the frontend
  UtteranceNormalized,   // the frame minus its utterance's mean frame
};

struct PretrainConfig {
  std::size_t steps = 300;
  double lr = 1e-3;
  std::size_t batch_size = 8;
  double mask_prob = 0.15;
  std::uint64_t seed = 0;
  ReconstructionTarget target = ReconstructionTarget::RawFrame;
};

struct PretrainResult {
  double heldout_loss_before = 0.0;
  double heldout_loss_after = 0.0;
  std::vector<double> trajectory;
};

/// Auxiliary modules that exist only during pretraining.
template <typename T>
struct MaskedPredictionHead {
  Var<T> mask_embedding;  // [d_model], replaces masked frames after the frontend
  Linear<T> reconstruct;  // d_model -> input_dim, applied to the top layer
};

template <typename T>
MaskedPredictionHead<T> make_masked_prediction_head(const BackboneConfig& config, Rng& rng);

/// Masked-frame objective on one sequence: rows in `masked` are swapped for
/// the mask embedding, and the loss is the mean squared error of
/// reconstructing those frames from the top layer. With no masked rows the
/// loss is identically zero.
template <typename T>
Var<T> masked_frame_loss(const Backbone<T>& backbone, const MaskedPredictionHead<T>& head,
                         const Tensor<T>& features, std::span<const std::size_t> masked,
                         ReconstructionTarget target);

/// Each frame is masked independently with probability p.
std::vector<std::size_t> sample_mask(std::size_t frames, double p, Rng& rng);

/// Trains every backbone parameter on the masked-frame objective, then
/// freezes the whole backbone. Throws ConfigError for an empty corpus.
PretrainResult pretrain_toy(Backbone<float>& backbone, std::span<const Tensor<float>> corpus,
                            std::span<const Tensor<float>> heldout, const PretrainConfig& config);

}  // namespace ladapt
