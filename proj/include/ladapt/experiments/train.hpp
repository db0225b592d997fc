#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ladapt/adapters/model.hpp"
#include "ladapt/backbone/pretrain.hpp"
#include "ladapt/experiments/tasks.hpp"

namespace ladapt {

inline const std::vector<double> kLearningRateGrid{1e-3, 5e-4, 1e-4, 5e-5, 1e-5};

/// How the frozen backbone is obtained: loaded from a checkpoint when a
/// path is given, otherwise pretrained in-process and cached.
struct BackboneSource {
  std::string preset = "toy";
  std::optional<std::filesystem::path> checkpoint;
  std::uint64_t init_seed = 7;
  PretrainConfig pretrain{.steps = 3000, .target = ReconstructionTarget::UtteranceNormalized};
  std::size_t corpus_size = 512;
  double corpus_noise = 1.0;
  double corpus_speaker_gain = 1.0;
};

struct RunConfig {
  BackboneSource backbone;
  AdaptationStrategy strategy = AdaptationStrategy::proposed(4, 3);
  SyntheticTaskSpec task;
  std::size_t steps = 2000;
  double lr = 1e-3;
  bool lr_grid = false;
  std::size_t batch_size = 8;
  std::size_t head_hidden = 0;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path out_dir = "out";

  /// Throws ConfigError on invalid combinations.
  void validate() const;
  HeadConfig head() const;
};

/// Toy defaults tuned for each task: strategy widths, noise and steps.
RunConfig default_run_config(TaskKind task);

void to_json(nlohmann::json& j, const RunConfig& c);
/// Missing keys keep their defaults; unknown enum names throw ConfigError.
void from_json(const nlohmann::json& j, RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);

struct RunReport {
  std::string strategy;
  TaskKind task = TaskKind::FrameContent;
  std::uint64_t seed = 0;
  double lr = 0.0;
  std::size_t steps = 0;
  std::size_t steps_completed = 0;
  std::vector<double> loss_trajectory;  // mean batch loss per step
  double initial_loss = 0.0;             // eval-set loss before training
  double final_loss = 0.0;               // eval-set loss after training
  double initial_train_loss = 0.0;       // full pass over the train set
  double final_train_loss = 0.0;
  double initial_metric = 0.0;
  double final_metric = 0.0;
  std::string metric_name;
  bool diverged = false;
  ParamReport params;
  bool params_match_enumeration = false;
  std::vector<std::size_t> weighted_layers;
  std::vector<double> layer_weights;
  std::optional<double> weight_centroid;
  std::uint64_t frozen_hash_before = 0;
  std::uint64_t frozen_hash_after = 0;
  double wall_seconds = 0.0;

  bool frozen_intact() const { return frozen_hash_before == frozen_hash_after; }
  bool converged() const;
};

void to_json(nlohmann::json& j, const RunReport& r);
void from_json(const nlohmann::json& j, RunReport& r);

struct PretrainedBackbone {
  Backbone<float> backbone;
  PretrainResult result;  // empty trajectory when pretraining was skipped
};

/// Fresh initialisation from the preset followed by masked-frame pretraining
/// on the synthetic corpus; never cached.
PretrainedBackbone pretrain_backbone(const BackboneSource& source, const SyntheticTaskSpec& task);

/// Frozen copy of the configured backbone. Pretrained backbones are cached
/// per (preset, init seed, pretraining settings, world) for the process.
Backbone<float> obtain_backbone(const BackboneSource& source, const SyntheticTaskSpec& task);

struct TrainHooks {
  /// Called after every optimiser step with (step, batch loss).
  std::function<void(std::size_t, double)> on_step;
};

/// One training run for one seed. The seed picks downstream initialisation
/// and batch order; the dataset is fixed by the task spec. Non-finite loss
/// stops the run and marks it diverged.
RunReport train(const RunConfig& config, std::uint64_t seed, const TrainHooks& hooks = {});
RunReport train(const RunConfig& config, std::uint64_t seed, const Backbone<float>& backbone, const Dataset& data,
                const TrainHooks& hooks = {});

/// Task metric of a model on the eval split: WER, EER after adaptive
/// s-norm, or 1 - weighted accuracy.
double evaluate_metric(const AdaptedModel<float>& model, const SyntheticTaskSpec& spec, const Dataset& data);
std::string metric_name(TaskKind kind);

/// Sum of (layer index, 1-based) times weight, divided by the layer count.
double weight_centroid(const std::vector<std::size_t>& layers, const std::vector<double>& weights,
                       std::size_t num_layers);

}  // namespace ladapt
