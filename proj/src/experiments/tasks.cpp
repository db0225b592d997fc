#include "ladapt/experiments/tasks.hpp"

#include <cmath>
#include <limits>

#include "ladapt/autodiff/errors.hpp"

namespace ladapt {

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::FrameContent: return "frame-content";
    case TaskKind::UtteranceSpeaker: return "utterance-speaker";
    case TaskKind::UtteranceClass: return "utterance-class";
  }
  return "?";
}

TaskKind task_kind_from_string(const std::string& name) {
  for (auto k : {TaskKind::FrameContent, TaskKind::UtteranceSpeaker, TaskKind::UtteranceClass})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown task '" + name + "'");
}

World World::make(std::uint64_t seed, std::size_t dim, double speaker_scale) {
  Rng rng = Rng(seed).split(0x3011D);
  Rng tok = rng.split(0), spk = rng.split(1), dir = rng.split(2);
  World w;
  w.tokens = Tensor<double>(Shape{kTokens, dim});
  for (auto& v : w.tokens.data()) v = tok.normal();
  w.speakers = Tensor<double>(Shape{kSpeakers, dim});
  for (auto& v : w.speakers.data()) v = speaker_scale * spk.normal();
  w.direction = Tensor<double>(Shape{dim});
  double norm = 0.0;
  for (auto& v : w.direction.data()) {
    v = dir.normal();
    norm += v * v;
  }
  for (auto& v : w.direction.data()) v /= std::sqrt(norm);
  return w;
}

void SyntheticTaskSpec::validate() const {
  if (input_dim == 0) throw ConfigError("task: input_dim must be positive");
  if (vocab < 2 || vocab > World::kTokens)
    throw ConfigError("task: vocab must be in 2.." + std::to_string(World::kTokens));
  if (num_speakers < 1 || num_speakers > World::kSpeakers)
    throw ConfigError("task: num_speakers must be in 1.." + std::to_string(World::kSpeakers));
  if (num_classes < 1) throw ConfigError("task: num_classes must be positive");
  if (min_frames < 1 || min_frames > max_frames) throw ConfigError("task: need 1 <= min_frames <= max_frames");
  if (min_run < 1 || min_run > max_run) throw ConfigError("task: need 1 <= min_run <= max_run");
  if (!(noise >= 0.0)) throw ConfigError("task: noise must be non-negative");
  if (train_size == 0 || eval_size == 0) throw ConfigError("task: train_size and eval_size must be positive");
  if (kind == TaskKind::UtteranceClass && eval_size < num_classes)
    throw ConfigError("task: eval_size must cover every class");
  if (kind == TaskKind::UtteranceSpeaker && cohort_size < 2)
    throw ConfigError("task: cohort_size must be at least 2");
  if (kind == TaskKind::UtteranceSpeaker && eval_size <= num_speakers)
    throw ConfigError("task: eval_size must exceed num_speakers so every split has same-speaker trials");
}

std::size_t SyntheticTaskSpec::head_outputs() const {
  switch (kind) {
    case TaskKind::FrameContent: return vocab;
    case TaskKind::UtteranceSpeaker: return num_speakers;
    case TaskKind::UtteranceClass: return num_classes;
  }
  return 0;
}

namespace {

/// Token index per frame in runs of min_run..max_run, adjacent runs distinct.
std::vector<std::size_t> token_runs(std::size_t frames, std::size_t vocab, std::size_t min_run,
                                    std::size_t max_run, Rng& rng) {
  std::vector<std::size_t> per_frame;
  std::size_t prev = std::numeric_limits<std::size_t>::max();
  while (per_frame.size() < frames) {
    std::size_t tok = rng.below(vocab);
    if (tok == prev) tok = (tok + 1 + rng.below(vocab - 1)) % vocab;
    const std::size_t len = min_run + rng.below(max_run - min_run + 1);
    for (std::size_t i = 0; i < len && per_frame.size() < frames; ++i) per_frame.push_back(tok);
    prev = tok;
  }
  return per_frame;
}

std::vector<std::size_t> collapse(const std::vector<std::size_t>& per_frame) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < per_frame.size(); ++t)
    if (t == 0 || per_frame[t] != per_frame[t - 1]) out.push_back(per_frame[t] + 1);
  return out;
}

double bump(std::size_t t, std::size_t frames, double center, double width) {
  const double x = frames > 1 ? static_cast<double>(t) / static_cast<double>(frames - 1) : 0.5;
  return std::exp(-(x - center) * (x - center) / (2.0 * width * width));
}

struct Composer {
  const World& world;
  const SyntheticTaskSpec& spec;

  Example make(std::size_t label, Rng& rng) const {
    const std::size_t dim = world.dim();
    const std::size_t frames = spec.min_frames + rng.below(spec.max_frames - spec.min_frames + 1);
    const auto per_frame = token_runs(frames, spec.vocab, spec.min_run, spec.max_run, rng);
    Example ex;
    ex.label = label;
    ex.features = Tensor<float>(Shape{frames, dim});
    const double gain = spec.envelope_gain * std::sqrt(static_cast<double>(dim));
    const double width = 0.5 / static_cast<double>(spec.num_classes);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t j = 0; j < dim; ++j) {
        double v = world.tokens.at(per_frame[t], j) + spec.noise * rng.normal();
        if (spec.kind == TaskKind::UtteranceSpeaker) v += world.speakers.at(label, j);
        if (spec.kind == TaskKind::UtteranceClass) {
          const double center = (static_cast<double>(label) + 0.5) / static_cast<double>(spec.num_classes);
          v += gain * bump(t, frames, center, width) * world.direction[j];
        }
        ex.features.at(t, j) = static_cast<float>(v);
      }
    }
    if (spec.kind == TaskKind::FrameContent) ex.tokens = collapse(per_frame);
    ex.frame_tokens = per_frame;
    return ex;
  }
};

std::vector<Example> make_split(const Composer& composer, std::size_t count, std::size_t labels, Rng rng,
                                const std::string& prefix) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < count; ++i) {
    Rng r = rng.split(i);
    out.push_back(composer.make(labels ? i % labels : 0, r));
    out.back().id = prefix + std::to_string(i) + "_" + std::to_string(out.back().label);
  }
  return out;
}

}  // namespace

Dataset generate_task(const SyntheticTaskSpec& spec, std::uint64_t seed) {
  spec.validate();
  const World world = World::make(spec.world_seed, spec.input_dim, spec.speaker_scale);
  const Composer composer{world, spec};
  std::size_t labels = 0;
  if (spec.kind == TaskKind::UtteranceSpeaker) labels = spec.num_speakers;
  if (spec.kind == TaskKind::UtteranceClass) labels = spec.num_classes;
  Rng rng = Rng(seed).split(0xDA7A);
  Dataset d;
  d.train = make_split(composer, spec.train_size, labels, rng.split(0), "train");
  d.eval = make_split(composer, spec.eval_size, labels, rng.split(1), "eval");
  if (spec.kind == TaskKind::UtteranceSpeaker) d.cohort = make_split(composer, spec.cohort_size, labels, rng.split(2), "cohort");
  return d;
}

std::vector<Tensor<float>> generate_pretraining_corpus(const World& world, std::size_t count,
                                                       std::size_t min_frames, std::size_t max_frames,
                                                       double noise, std::uint64_t seed, double speaker_gain) {
  if (min_frames < 1 || min_frames > max_frames) throw ConfigError("pretraining corpus: bad frame range");
  Rng rng = Rng(seed).split(0xC0);
  const std::size_t dim = world.dim();
  std::vector<Tensor<float>> corpus;
  for (std::size_t i = 0; i < count; ++i) {
    Rng r = rng.split(i);
    const std::size_t frames = min_frames + r.below(max_frames - min_frames + 1);
    const auto per_frame = token_runs(frames, World::kTokens, 2, 4, r);
    const std::size_t speaker = r.below(World::kSpeakers);
    const double center = r.uniform(), width = r.uniform(0.05, 0.25);
    const double gain = r.uniform(0.0, 2.0) * std::sqrt(static_cast<double>(dim));
    Tensor<float> x(Shape{frames, dim});
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t j = 0; j < dim; ++j)
        x.at(t, j) = static_cast<float>(world.tokens.at(per_frame[t], j) + speaker_gain * world.speakers.at(speaker, j) +
                                        gain * bump(t, frames, center, width) * world.direction[j] +
                                        noise * r.normal());
    corpus.push_back(std::move(x));
  }
  return corpus;
}

std::vector<std::size_t> nearest_token_decode(const World& world, std::size_t vocab, const Tensor<float>& features) {
  std::vector<std::size_t> per_frame;
  for (std::size_t t = 0; t < features.rows(); ++t) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < vocab; ++k) {
      double d = 0.0;
      for (std::size_t j = 0; j < features.cols(); ++j) {
        const double e = features.at(t, j) - world.tokens.at(k, j);
        d += e * e;
      }
      if (d < best_d) best_d = d, best = k;
    }
    per_frame.push_back(best);
  }
  return collapse(per_frame);
}

}  // namespace ladapt
