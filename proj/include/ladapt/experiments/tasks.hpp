#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ladapt/autodiff/rng.hpp"
#include "ladapt/autodiff/tensor.hpp"

namespace ladapt {

enum class TaskKind { FrameContent, UtteranceSpeaker, UtteranceClass };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

/// Fixed random codebooks every task and the pretraining corpus draw from:
/// token prototypes, per-speaker offsets and one envelope direction.
struct World {
  static constexpr std::size_t kTokens = 16;
  static constexpr std::size_t kSpeakers = 32;

  Tensor<double> tokens;     // [kTokens x dim]
  Tensor<double> speakers;   // [kSpeakers x dim]
  Tensor<double> direction;  // [dim], unit norm

  static World make(std::uint64_t seed, std::size_t dim, double speaker_scale = 1.0);
  std::size_t dim() const { return direction.numel(); }
};

struct SyntheticTaskSpec {
  TaskKind kind = TaskKind::FrameContent;
  std::size_t vocab = 8;         // FrameContent labels and nuisance content elsewhere
  std::size_t num_speakers = 8;
  std::size_t num_classes = 4;
  std::size_t min_frames = 20;
  std::size_t max_frames = 40;
  std::size_t min_run = 2;       // frames per token run
  std::size_t max_run = 4;
  double noise = 0.5;
  double speaker_scale = 1.0;
  double envelope_gain = 2.0;
  std::size_t train_size = 256;
  std::size_t eval_size = 64;
  std::size_t cohort_size = 32;  // UtteranceSpeaker only
  std::uint64_t world_seed = 1;
  std::size_t input_dim = 16;
  std::uint64_t seed = 0;        // dataset draw

  /// Throws ConfigError on sizes the world cannot supply.
  void validate() const;
  /// Vocabulary or class count seen by the head.
  std::size_t head_outputs() const;
};

struct Example {
  Tensor<float> features;            // [T x input_dim]
  std::vector<std::size_t> tokens;   // FrameContent target, labels 1..vocab
  std::vector<std::size_t> frame_tokens;  // 0-based token under each frame
  std::size_t label = 0;             // speaker or class index
  std::string id;
};

struct Dataset {
  std::vector<Example> train;
  std::vector<Example> eval;
  std::vector<Example> cohort;  // UtteranceSpeaker s-norm cohort
};

/// Deterministic in (spec, seed).
Dataset generate_task(const SyntheticTaskSpec& spec, std::uint64_t seed);

/// Unlabelled utterances mixing every factor the tasks use, for pretraining.
/// Speaker offsets are scaled by `speaker_gain`.
std::vector<Tensor<float>> generate_pretraining_corpus(const World& world, std::size_t count,
                                                       std::size_t min_frames, std::size_t max_frames,
                                                       double noise, std::uint64_t seed,
                                                       double speaker_gain = 1.0);

/// Token whose prototype is nearest each frame, then collapse of repeated
/// neighbours; labels are 1-based as in CTC targets.
std::vector<std::size_t> nearest_token_decode(const World& world, std::size_t vocab, const Tensor<float>& features);

}  // namespace ladapt
