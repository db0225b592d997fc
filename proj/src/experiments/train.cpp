#include "ladapt/experiments/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>

#include "ladapt/autodiff/adam.hpp"
#include "ladapt/backbone/checkpoint.hpp"
#include "ladapt/metrics/metrics.hpp"

namespace ladapt {

using nlohmann::json;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

void RunConfig::validate() const {
  task.validate();
  if (batch_size == 0) throw ConfigError("run: batch_size must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("run: learning rate must be positive");
  if (seeds.empty()) throw ConfigError("run: seed list is empty");
  if (lr_grid) {
    bool on_grid = false;
    for (double g : kLearningRateGrid) on_grid = on_grid || std::abs(g - lr) <= 1e-12 * g;
    if (!on_grid) throw ConfigError("run: learning rate must come from the grid in grid mode");
  }
}

HeadConfig RunConfig::head() const {
  HeadConfig h;
  h.kind = task.kind == TaskKind::FrameContent ? HeadKind::Ctc : HeadKind::Classification;
  h.outputs = task.head_outputs();
  h.hidden = head_hidden;
  return h;
}

RunConfig default_run_config(TaskKind task) {
  RunConfig c;
  c.task.kind = task;
  c.task.noise = 1.0;
  if (task == TaskKind::UtteranceSpeaker) {
    c.task.num_speakers = 32;
    c.task.speaker_scale = 0.3;
  }
  c.strategy.l_adapter.embed_dim = 24;
  c.strategy.l_adapter.skip_bottleneck = 16;
  c.strategy.bottleneck_dim = 16;
  return c;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json strategy_json(const AdaptationStrategy& s) {
  return {{"kind", to_string(s.kind)},
          {"k", s.k},
          {"l", s.l},
          {"variant", to_string(s.l_adapter.variant)},
          {"embed_dim", s.l_adapter.embed_dim},
          {"skip_bottleneck", s.l_adapter.skip_bottleneck},
          {"l_activation", to_string(s.l_adapter.activation)},
          {"bottleneck_dim", s.bottleneck_dim},
          {"activation", to_string(s.activation)}};
}

AdaptationStrategy strategy_from_json(const json& j, AdaptationStrategy s) {
  if (j.contains("kind")) s.kind = strategy_kind_from_string(j.at("kind").get<std::string>());
  s.k = j.value("k", s.k);
  s.l = j.value("l", s.l);
  if (j.contains("variant")) s.l_adapter.variant = l_adapter_variant_from_string(j.at("variant").get<std::string>());
  s.l_adapter.embed_dim = j.value("embed_dim", s.l_adapter.embed_dim);
  s.l_adapter.skip_bottleneck = j.value("skip_bottleneck", s.l_adapter.skip_bottleneck);
  s.bottleneck_dim = j.value("bottleneck_dim", s.bottleneck_dim);
  if (j.contains("activation")) {
    s.activation = activation_from_string(j.at("activation").get<std::string>());
    s.l_adapter.activation = s.activation;
  }
  if (j.contains("l_activation")) s.l_adapter.activation = activation_from_string(j.at("l_activation").get<std::string>());
  return s;
}

json task_json(const SyntheticTaskSpec& t) {
  return {{"kind", to_string(t.kind)},     {"vocab", t.vocab},
          {"num_speakers", t.num_speakers}, {"num_classes", t.num_classes},
          {"min_frames", t.min_frames},     {"max_frames", t.max_frames},
          {"min_run", t.min_run},           {"max_run", t.max_run},
          {"noise", t.noise},               {"speaker_scale", t.speaker_scale},
          {"envelope_gain", t.envelope_gain}, {"train_size", t.train_size},
          {"eval_size", t.eval_size},       {"cohort_size", t.cohort_size},
          {"world_seed", t.world_seed},     {"input_dim", t.input_dim},
          {"seed", t.seed}};
}

SyntheticTaskSpec task_from_json(const json& j, SyntheticTaskSpec t) {
  if (j.contains("kind")) t.kind = task_kind_from_string(j.at("kind").get<std::string>());
  t.vocab = j.value("vocab", t.vocab);
  t.num_speakers = j.value("num_speakers", t.num_speakers);
  t.num_classes = j.value("num_classes", t.num_classes);
  t.min_frames = j.value("min_frames", t.min_frames);
  t.max_frames = j.value("max_frames", t.max_frames);
  t.min_run = j.value("min_run", t.min_run);
  t.max_run = j.value("max_run", t.max_run);
  t.noise = j.value("noise", t.noise);
  t.speaker_scale = j.value("speaker_scale", t.speaker_scale);
  t.envelope_gain = j.value("envelope_gain", t.envelope_gain);
  t.train_size = j.value("train_size", t.train_size);
  t.eval_size = j.value("eval_size", t.eval_size);
  t.cohort_size = j.value("cohort_size", t.cohort_size);
  t.world_seed = j.value("world_seed", t.world_seed);
  t.input_dim = j.value("input_dim", t.input_dim);
  t.seed = j.value("seed", t.seed);
  return t;
}

std::string target_name(ReconstructionTarget t) {
  return t == ReconstructionTarget::RawFrame ? "raw" : "utterance-normalized";
}

ReconstructionTarget target_from_name(const std::string& name) {
  if (name == "raw") return ReconstructionTarget::RawFrame;
  if (name == "utterance-normalized") return ReconstructionTarget::UtteranceNormalized;
  throw ConfigError("unknown reconstruction target '" + name + "'");
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_or_nan(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

}  // namespace

void to_json(json& j, const RunConfig& c) {
  const auto& p = c.backbone.pretrain;
  j = {{"backbone",
        {{"preset", c.backbone.preset},
         {"checkpoint", c.backbone.checkpoint ? json(c.backbone.checkpoint->string()) : json(nullptr)},
         {"init_seed", c.backbone.init_seed},
         {"corpus_size", c.backbone.corpus_size},
         {"corpus_noise", c.backbone.corpus_noise},
         {"corpus_speaker_gain", c.backbone.corpus_speaker_gain},
         {"pretrain",
          {{"steps", p.steps},
           {"lr", p.lr},
           {"batch_size", p.batch_size},
           {"mask_prob", p.mask_prob},
           {"seed", p.seed},
           {"target", target_name(p.target)}}}}},
       {"strategy", strategy_json(c.strategy)},
       {"task", task_json(c.task)},
       {"steps", c.steps},
       {"lr", c.lr},
       {"lr_grid", c.lr_grid},
       {"batch_size", c.batch_size},
       {"head_hidden", c.head_hidden},
       {"seeds", c.seeds},
       {"out_dir", c.out_dir.string()}};
}

void from_json(const json& j, RunConfig& c) {
  const TaskKind kind = j.contains("task") && j.at("task").contains("kind")
                            ? task_kind_from_string(j.at("task").at("kind").get<std::string>())
                            : c.task.kind;
  c = default_run_config(kind);
  try {
    if (j.contains("backbone")) {
      const json& b = j.at("backbone");
      c.backbone.preset = b.value("preset", c.backbone.preset);
      if (b.contains("checkpoint") && !b.at("checkpoint").is_null())
        c.backbone.checkpoint = b.at("checkpoint").get<std::string>();
      c.backbone.init_seed = b.value("init_seed", c.backbone.init_seed);
      c.backbone.corpus_size = b.value("corpus_size", c.backbone.corpus_size);
      c.backbone.corpus_noise = b.value("corpus_noise", c.backbone.corpus_noise);
      c.backbone.corpus_speaker_gain = b.value("corpus_speaker_gain", c.backbone.corpus_speaker_gain);
      if (b.contains("pretrain")) {
        const json& p = b.at("pretrain");
        auto& pc = c.backbone.pretrain;
        pc.steps = p.value("steps", pc.steps);
        pc.lr = p.value("lr", pc.lr);
        pc.batch_size = p.value("batch_size", pc.batch_size);
        pc.mask_prob = p.value("mask_prob", pc.mask_prob);
        pc.seed = p.value("seed", pc.seed);
        if (p.contains("target")) pc.target = target_from_name(p.at("target").get<std::string>());
      }
    }
    if (j.contains("strategy")) c.strategy = strategy_from_json(j.at("strategy"), c.strategy);
    if (j.contains("task")) c.task = task_from_json(j.at("task"), c.task);
    c.steps = j.value("steps", c.steps);
    c.lr = j.value("lr", c.lr);
    c.lr_grid = j.value("lr_grid", c.lr_grid);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.head_hidden = j.value("head_hidden", c.head_hidden);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  RunConfig c = j.get<RunConfig>();
  c.validate();
  return c;
}

bool RunReport::converged() const {
  return !diverged && std::isfinite(final_train_loss) && final_train_loss < initial_train_loss;
}

void to_json(json& j, const RunReport& r) {
  json trajectory = json::array();
  for (double v : r.loss_trajectory) trajectory.push_back(number_or_null(v));
  j = {{"strategy", r.strategy},
       {"task", to_string(r.task)},
       {"seed", r.seed},
       {"lr", r.lr},
       {"steps", r.steps},
       {"steps_completed", r.steps_completed},
       {"initial_loss", number_or_null(r.initial_loss)},
       {"final_loss", number_or_null(r.final_loss)},
       {"initial_train_loss", number_or_null(r.initial_train_loss)},
       {"final_train_loss", number_or_null(r.final_train_loss)},
       {"metric", r.metric_name},
       {"initial_metric", number_or_null(r.initial_metric)},
       {"final_metric", number_or_null(r.final_metric)},
       {"diverged", r.diverged},
       {"converged", r.converged()},
       {"params",
        {{"trainable", r.params.trainable()},
         {"total", r.params.total()},
         {"ratio", r.params.ratio()},
         {"ratio_to_backbone", r.params.ratio_to_backbone()},
         {"l_adapters", r.params.l_adapters},
         {"e_adapters", r.params.e_adapters},
         {"conventional_adapters", r.params.conventional_adapters},
         {"layer_weights", r.params.layer_weights},
         {"encoder_norms", r.params.encoder_norms},
         {"encoder_layers", r.params.encoder_layers},
         {"head", r.params.head},
         {"backbone", r.params.backbone},
         {"matches_enumeration", r.params_match_enumeration}}},
       {"weighted_layers", r.weighted_layers},
       {"layer_weights", r.layer_weights},
       {"weight_centroid", r.weight_centroid ? json(*r.weight_centroid) : json(nullptr)},
       {"frozen_hash_before", r.frozen_hash_before},
       {"frozen_hash_after", r.frozen_hash_after},
       {"frozen_intact", r.frozen_intact()},
       {"wall_seconds", r.wall_seconds},
       {"loss_trajectory", trajectory}};
}

void from_json(const json& j, RunReport& r) {
  try {
    r.strategy = j.at("strategy").get<std::string>();
    r.task = task_kind_from_string(j.at("task").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.lr = j.at("lr").get<double>();
    r.steps = j.at("steps").get<std::size_t>();
    r.steps_completed = j.at("steps_completed").get<std::size_t>();
    r.initial_loss = number_or_nan(j.at("initial_loss"));
    r.final_loss = number_or_nan(j.at("final_loss"));
    r.initial_train_loss = number_or_nan(j.at("initial_train_loss"));
    r.final_train_loss = number_or_nan(j.at("final_train_loss"));
    r.metric_name = j.at("metric").get<std::string>();
    r.initial_metric = number_or_nan(j.at("initial_metric"));
    r.final_metric = number_or_nan(j.at("final_metric"));
    r.diverged = j.at("diverged").get<bool>();
    const json& p = j.at("params");
    r.params.l_adapters = p.at("l_adapters");
    r.params.e_adapters = p.at("e_adapters");
    r.params.conventional_adapters = p.at("conventional_adapters");
    r.params.layer_weights = p.at("layer_weights");
    r.params.encoder_norms = p.at("encoder_norms");
    r.params.encoder_layers = p.at("encoder_layers");
    r.params.head = p.at("head");
    r.params.backbone = p.at("backbone");
    r.params_match_enumeration = p.at("matches_enumeration");
    r.weighted_layers = j.at("weighted_layers").get<std::vector<std::size_t>>();
    r.layer_weights = j.at("layer_weights").get<std::vector<double>>();
    if (!j.at("weight_centroid").is_null()) r.weight_centroid = j.at("weight_centroid").get<double>();
    r.frozen_hash_before = j.at("frozen_hash_before");
    r.frozen_hash_after = j.at("frozen_hash_after");
    r.wall_seconds = j.at("wall_seconds");
    r.loss_trajectory.clear();
    for (const auto& v : j.at("loss_trajectory")) r.loss_trajectory.push_back(number_or_nan(v));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run report: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Backbone

PretrainedBackbone pretrain_backbone(const BackboneSource& source, const SyntheticTaskSpec& task) {
  const BackboneConfig cfg = BackboneConfig::preset(source.preset);
  if (cfg.input_dim != task.input_dim) {
    throw ConfigError("preset " + source.preset + " expects input_dim " + std::to_string(cfg.input_dim) +
                      ", task provides " + std::to_string(task.input_dim));
  }
  if (cfg.max_seq_len < task.max_frames) throw ConfigError("task max_frames exceeds the backbone's max_seq_len");
  Rng rng(source.init_seed);
  PretrainedBackbone out{Backbone<float>(cfg, rng), {}};
  const auto& p = source.pretrain;
  if (p.steps > 0) {
    const World world = World::make(task.world_seed, task.input_dim);
    const auto corpus = generate_pretraining_corpus(world, source.corpus_size, task.min_frames, task.max_frames,
                                                    source.corpus_noise, p.seed, source.corpus_speaker_gain);
    const auto heldout = generate_pretraining_corpus(world, 32, task.min_frames, task.max_frames, source.corpus_noise,
                                                     p.seed + 0x9E3779B9ull, source.corpus_speaker_gain);
    out.result = pretrain_toy(out.backbone, corpus, heldout, p);
  }
  return out;
}

Backbone<float> obtain_backbone(const BackboneSource& source, const SyntheticTaskSpec& task) {
  if (source.checkpoint) {
    const Checkpoint ck = load_checkpoint(*source.checkpoint);
    if (ck.config.input_dim != task.input_dim) {
      throw ConfigError("checkpoint input_dim " + std::to_string(ck.config.input_dim) + " does not match task input_dim " +
                        std::to_string(task.input_dim));
    }
    return Backbone<float>::from_values(ck.config, ck.parameters);
  }
  const auto& p = source.pretrain;
  const json key = {source.preset, source.init_seed, source.corpus_size, source.corpus_noise, source.corpus_speaker_gain,
                    p.steps, p.lr, p.batch_size, p.mask_prob, p.seed, target_name(p.target),
                    task.world_seed, task.input_dim, task.min_frames, task.max_frames};
  static std::mutex mutex;
  static std::map<std::string, Backbone<float>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(key.dump());
  if (it == cache.end()) it = cache.emplace(key.dump(), pretrain_backbone(source, task).backbone).first;
  return it->second.deep_copy();
}

// ---------------------------------------------------------------------------
// Evaluation

std::string metric_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::FrameContent: return "wer";
    case TaskKind::UtteranceSpeaker: return "eer";
    case TaskKind::UtteranceClass: return "1-weighted_accuracy";
  }
  return "?";
}

namespace {

std::vector<double> embedding_of(const AdaptedModel<float>& model, const Example& ex) {
  const auto out = model.forward(ex.features);
  const auto& e = out.embedding.value();
  return std::vector<double>(e.data().begin(), e.data().end());
}

std::size_t argmax(const Tensor<float>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.numel(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

double eval_loss(const AdaptedModel<float>& model, const std::vector<Example>& data) {
  NoGradGuard guard;
  double total = 0.0;
  try {
    for (const auto& ex : data) total += model.loss(model.forward(ex.features), ex.tokens, ex.label).value().item();
  } catch (const NonFiniteError&) {
    return kNaN;
  }
  return total / static_cast<double>(data.size());
}

}  // namespace

double evaluate_metric(const AdaptedModel<float>& model, const SyntheticTaskSpec& spec, const Dataset& data) {
  NoGradGuard guard;
  switch (spec.kind) {
    case TaskKind::FrameContent: {
      std::vector<std::vector<std::size_t>> refs, hyps;
      for (const auto& ex : data.eval) {
        refs.push_back(ex.tokens);
        hyps.push_back(ctc_greedy_decode(model.forward(ex.features).logits.value()));
      }
      return corpus_wer(refs, hyps);
    }
    case TaskKind::UtteranceSpeaker: {
      std::vector<std::vector<double>> eval_emb, cohort_emb;
      for (const auto& ex : data.eval) eval_emb.push_back(embedding_of(model, ex));
      for (const auto& ex : data.cohort) cohort_emb.push_back(embedding_of(model, ex));
      std::vector<std::vector<double>> cohort_scores(eval_emb.size());
      for (std::size_t i = 0; i < eval_emb.size(); ++i)
        for (const auto& c : cohort_emb) cohort_scores[i].push_back(cosine_similarity(eval_emb[i], c));
      std::vector<TrialScore> trials;
      for (std::size_t i = 0; i < eval_emb.size(); ++i)
        for (std::size_t j = i + 1; j < eval_emb.size(); ++j)
          trials.push_back({data.eval[i].id, data.eval[j].id, cosine_similarity(eval_emb[i], eval_emb[j]),
                            data.eval[i].label == data.eval[j].label});
      // A collapsed embedding space has no cohort spread; score it raw.
      try {
        std::vector<TrialScore> normalized = trials;
        std::size_t n = 0;
        for (std::size_t i = 0; i < eval_emb.size(); ++i)
          for (std::size_t j = i + 1; j < eval_emb.size(); ++j, ++n)
            normalized[n].score = adaptive_s_norm(trials[n].score, cohort_scores[i], cohort_scores[j]);
        return eer(normalized).rate;
      } catch (const DegenerateCohortError&) {
        return eer(trials).rate;
      }
    }
    case TaskKind::UtteranceClass: {
      std::vector<std::size_t> pred, gold;
      for (const auto& ex : data.eval) {
        pred.push_back(argmax(model.forward(ex.features).logits.value()));
        gold.push_back(ex.label);
      }
      return 1.0 - weighted_accuracy(pred, gold, spec.num_classes);
    }
  }
  return kNaN;
}

double weight_centroid(const std::vector<std::size_t>& layers, const std::vector<double>& weights,
                       std::size_t num_layers) {
  if (layers.size() != weights.size()) throw ShapeError("weight_centroid: layer/weight count mismatch");
  double c = 0.0;
  for (std::size_t i = 0; i < layers.size(); ++i) c += static_cast<double>(layers[i] + 1) * weights[i];
  return c / static_cast<double>(num_layers);
}

// ---------------------------------------------------------------------------
// Training

RunReport train(const RunConfig& config, std::uint64_t seed, const TrainHooks& hooks) {
  config.validate();
  const Backbone<float> backbone = obtain_backbone(config.backbone, config.task);
  const Dataset data = generate_task(config.task, config.task.seed);
  return train(config, seed, backbone, data, hooks);
}

RunReport train(const RunConfig& config, std::uint64_t seed, const Backbone<float>& backbone, const Dataset& data,
                const TrainHooks& hooks) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  Rng rng = Rng(seed).split(0x7124);
  Rng init_rng = rng.split(0), order_rng = rng.split(1);
  const HeadConfig head = config.head();
  AdaptedModel<float> model(backbone.deep_copy(), config.strategy, head, init_rng);

  RunReport report;
  report.strategy = config.strategy.label();
  report.task = config.task.kind;
  report.seed = seed;
  report.lr = config.lr;
  report.steps = config.steps;
  report.metric_name = metric_name(config.task.kind);
  report.params = count_learnable_params(config.strategy, backbone.config(), &head);
  const ParamReport brute = enumerate_params(model);
  report.params_match_enumeration =
      brute.trainable() == report.params.trainable() && brute.total() == report.params.total();

  const ParameterSet<float> params = model.parameters();
  report.frozen_hash_before = params.frozen_hash();
  report.initial_loss = eval_loss(model, data.eval);
  report.initial_train_loss = eval_loss(model, data.train);
  report.initial_metric = evaluate_metric(model, config.task, data);

  std::vector<Var<float>> trainable;
  for (const auto& e : params.trainable()) trainable.push_back(e.var);
  Adam<float> adam(trainable, AdamConfig{.lr = config.lr});
  const float inv_batch = 1.0f / static_cast<float>(config.batch_size);

  for (std::size_t step = 0; step < config.steps; ++step) {
    adam.zero_grad();
    double batch_loss = kNaN;
    try {
      std::vector<Var<float>> losses;
      for (std::size_t b = 0; b < config.batch_size; ++b) {
        const Example& ex = data.train[order_rng.below(data.train.size())];
        losses.push_back(model.loss(model.forward(ex.features), ex.tokens, ex.label));
      }
      Var<float> loss = weighted_sum(losses, Var<float>::constant(Tensor<float>(Shape{losses.size()}, inv_batch)));
      batch_loss = loss.value().item();
      backward(loss);
    } catch (const NonFiniteError&) {
      batch_loss = kNaN;
    }
    report.loss_trajectory.push_back(batch_loss);
    if (!std::isfinite(batch_loss)) {
      report.diverged = true;
      break;
    }
    adam.step();
    report.steps_completed = step + 1;
    if (hooks.on_step) hooks.on_step(step, batch_loss);
  }

  report.final_loss = eval_loss(model, data.eval);
  report.final_train_loss = eval_loss(model, data.train);
  if (!std::isfinite(report.final_loss) || !std::isfinite(report.final_train_loss)) report.diverged = true;
  report.final_metric = report.diverged ? kNaN : evaluate_metric(model, config.task, data);
  report.frozen_hash_after = params.frozen_hash();
  if (model.has_layer_weights()) {
    report.weighted_layers = model.weighted_layers();
    report.layer_weights = model.layer_weights();
    report.weight_centroid = weight_centroid(report.weighted_layers, report.layer_weights, backbone.num_layers());
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace ladapt
