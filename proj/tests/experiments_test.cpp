#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ladapt/experiments/report.hpp"
#include "ladapt/metrics/metrics.hpp"

using namespace ladapt;

namespace {

RunConfig tiny_config(TaskKind kind) {
  RunConfig c = default_run_config(kind);
  c.backbone.pretrain.steps = 0;
  c.task.min_frames = 8;
  c.task.max_frames = 12;
  c.task.train_size = 16;
  c.task.eval_size = 12;
  c.task.cohort_size = 6;
  if (kind == TaskKind::UtteranceSpeaker) c.task.num_speakers = 4;
  c.steps = 2;
  c.batch_size = 2;
  return c;
}

bool same_examples(const std::vector<Example>& a, const std::vector<Example>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].features.shape() != b[i].features.shape() || !std::ranges::equal(a[i].features.data(), b[i].features.data()) ||
        a[i].tokens != b[i].tokens || a[i].label != b[i].label || a[i].id != b[i].id)
      return false;
  }
  return true;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Tasks, DeterministicInSpecAndSeed) {
  for (auto kind : {TaskKind::FrameContent, TaskKind::UtteranceSpeaker, TaskKind::UtteranceClass}) {
    const auto spec = tiny_config(kind).task;
    const Dataset a = generate_task(spec, 3), b = generate_task(spec, 3), c = generate_task(spec, 4);
    EXPECT_TRUE(same_examples(a.train, b.train));
    EXPECT_TRUE(same_examples(a.eval, b.eval));
    EXPECT_TRUE(same_examples(a.cohort, b.cohort));
    EXPECT_FALSE(same_examples(a.train, c.train));
  }
}

TEST(Tasks, NoiselessFrameContentIsSolvedByNearestToken) {
  SyntheticTaskSpec spec = tiny_config(TaskKind::FrameContent).task;
  spec.noise = 0.0;
  const Dataset d = generate_task(spec, 0);
  const World world = World::make(spec.world_seed, spec.input_dim);
  std::vector<std::vector<std::size_t>> refs, hyps;
  for (const auto& ex : d.eval) {
    refs.push_back(ex.tokens);
    hyps.push_back(nearest_token_decode(world, spec.vocab, ex.features));
  }
  EXPECT_EQ(corpus_wer(refs, hyps), 0.0);
}

TEST(Tasks, FrameContentShapeAndRuns) {
  const auto spec = tiny_config(TaskKind::FrameContent).task;
  for (const auto& ex : generate_task(spec, 1).train) {
    ASSERT_GE(ex.features.rows(), spec.min_frames);
    ASSERT_LE(ex.features.rows(), spec.max_frames);
    ASSERT_EQ(ex.features.cols(), spec.input_dim);
    ASSERT_EQ(ex.frame_tokens.size(), ex.features.rows());
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
      EXPECT_GE(ex.tokens[i], 1u);
      EXPECT_LE(ex.tokens[i], spec.vocab);
      if (i > 0) EXPECT_NE(ex.tokens[i], ex.tokens[i - 1]);
    }
    EXPECT_LE(ex.features.rows(), ctc_min_frames(ex.tokens) * spec.max_run);
    EXPECT_GE(ex.features.rows(), ctc_min_frames(ex.tokens));
  }
}

TEST(Tasks, SingleSpeakerIsTriviallySolvable) {
  SyntheticTaskSpec spec = tiny_config(TaskKind::UtteranceSpeaker).task;
  spec.num_speakers = 1;
  const Dataset d = generate_task(spec, 0);
  std::vector<std::size_t> gold, constant;
  for (const auto& ex : d.eval) gold.push_back(ex.label), constant.push_back(0);
  EXPECT_EQ(accuracy(constant, gold), 1.0);
}

TEST(Tasks, SpeakerOffsetIsConstantPerUtterance) {
  SyntheticTaskSpec spec = tiny_config(TaskKind::UtteranceSpeaker).task;
  spec.noise = 0.0;
  const World world = World::make(spec.world_seed, spec.input_dim, spec.speaker_scale);
  for (const auto& ex : generate_task(spec, 0).train)
    for (std::size_t t = 0; t < ex.features.rows(); ++t)
      for (std::size_t j = 0; j < spec.input_dim; ++j)
        EXPECT_NEAR(ex.features.at(t, j) - world.tokens.at(ex.frame_tokens[t], j), world.speakers.at(ex.label, j),
                    1e-5);
}

TEST(Tasks, ClassLabelsBalancedAndValidation) {
  const auto spec = tiny_config(TaskKind::UtteranceClass).task;
  std::vector<std::size_t> counts(spec.num_classes);
  for (const auto& ex : generate_task(spec, 0).eval) ++counts[ex.label];
  for (auto n : counts) EXPECT_EQ(n, spec.eval_size / spec.num_classes);

  SyntheticTaskSpec bad = spec;
  bad.vocab = 17;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = spec;
  bad.min_frames = 50;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = tiny_config(TaskKind::UtteranceSpeaker).task;
  bad.eval_size = bad.num_speakers;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Train, ZeroStepsKeepsInitialMetric) {
  for (auto kind : {TaskKind::FrameContent, TaskKind::UtteranceSpeaker, TaskKind::UtteranceClass}) {
    RunConfig c = tiny_config(kind);
    c.steps = 0;
    const RunReport r = train(c, 0);
    EXPECT_EQ(r.final_metric, r.initial_metric) << to_string(kind);
    EXPECT_EQ(r.final_loss, r.initial_loss);
    EXPECT_EQ(r.final_train_loss, r.initial_train_loss);
    EXPECT_EQ(r.steps_completed, 0u);
    EXPECT_TRUE(r.loss_trajectory.empty());
  }
}

TEST(Train, HeadOnlyLossDecreasesOnUtteranceClass) {
  RunConfig c = tiny_config(TaskKind::UtteranceClass);
  c.strategy = AdaptationStrategy::fine_tune_top(0);
  c.task.noise = 0.1;
  c.task.train_size = 128;
  c.task.eval_size = 32;
  c.steps = 150;
  c.batch_size = 8;
  const RunReport r = train(c, 0);
  EXPECT_FALSE(r.diverged);
  EXPECT_LT(r.final_loss, r.initial_loss);
  EXPECT_LT(r.final_train_loss, r.initial_train_loss);
  EXPECT_TRUE(r.converged());
}

TEST(Train, FreezeContractAndAccountingForEveryStrategy) {
  RunConfig c = tiny_config(TaskKind::FrameContent);
  c.steps = 5;
  for (const auto& s : {AdaptationStrategy::fine_tune_top(2), AdaptationStrategy::conventional(2),
                        AdaptationStrategy::proposed(3, 2), AdaptationStrategy::l_adapters_only(),
                        AdaptationStrategy::e_adapters_only()}) {
    c.strategy = s;
    c.strategy.bottleneck_dim = 8;
    c.strategy.l_adapter.embed_dim = 12;
    c.strategy.l_adapter.skip_bottleneck = 8;
    const RunReport r = train(c, 1);
    EXPECT_TRUE(r.frozen_intact()) << r.strategy;
    EXPECT_TRUE(r.params_match_enumeration) << r.strategy;
    const HeadConfig head = c.head();
    EXPECT_EQ(r.params.trainable(), count_learnable_params(c.strategy, BackboneConfig::preset("toy"), &head).trainable());
    EXPECT_EQ(r.steps_completed, 5u);
  }
}

TEST(Train, ReportsAreReproducible) {
  const RunConfig c = tiny_config(TaskKind::UtteranceSpeaker);
  const RunReport a = train(c, 5), b = train(c, 5), other = train(c, 6);
  EXPECT_EQ(a.loss_trajectory, b.loss_trajectory);
  EXPECT_EQ(a.final_metric, b.final_metric);
  EXPECT_EQ(a.layer_weights, b.layer_weights);
  EXPECT_NE(a.loss_trajectory, other.loss_trajectory);
}

TEST(Train, DivergenceIsRecordedNotThrown) {
  RunConfig c = tiny_config(TaskKind::FrameContent);
  c.lr = 1e30;
  c.steps = 20;
  RunReport r;
  ASSERT_NO_THROW(r = train(c, 0));
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.converged());
  EXPECT_TRUE(r.frozen_intact());
  std::ostringstream csv;
  write_sweep_csv(csv, {SweepEntry{c.strategy, r}});
  EXPECT_NE(csv.str().find("NA,NA,1\n"), std::string::npos);
  EXPECT_EQ(csv.str().find("nan"), std::string::npos);
}

TEST(Train, GridModeRequiresGridRate) {
  RunConfig c = tiny_config(TaskKind::FrameContent);
  c.lr_grid = true;
  c.lr = 2e-3;
  EXPECT_THROW(c.validate(), ConfigError);
  c.lr = 5e-5;
  EXPECT_NO_THROW(c.validate());
}

TEST(Train, ConfigJsonRoundTrip) {
  RunConfig c = tiny_config(TaskKind::UtteranceClass);
  c.strategy = AdaptationStrategy::proposed(2, 1);
  c.strategy.l_adapter.variant = LAdapterVariant::FCLN;
  c.seeds = {3, 4};
  c.lr = 5e-4;
  const nlohmann::json j = c;
  const RunConfig back = j.get<RunConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(back.strategy.label(), c.strategy.label());
  EXPECT_THROW(nlohmann::json::parse(R"({"task": {"kind": "nope"}})").get<RunConfig>(), ConfigError);
}

TEST(Train, ReportJsonRoundTrip) {
  const RunReport r = train(tiny_config(TaskKind::FrameContent), 0);
  const nlohmann::json j = r;
  EXPECT_EQ(nlohmann::json(j.get<RunReport>()), j);
  EXPECT_EQ(j.at("params").at("trainable"), r.params.trainable());
}

TEST(Report, SweepGridSizeAndCsv) {
  RunConfig c = tiny_config(TaskKind::UtteranceClass);
  c.steps = 1;
  c.task.eval_size = 4;
  c.strategy.bottleneck_dim = 8;
  c.strategy.l_adapter.embed_dim = 8;
  const std::size_t L = 4;
  EXPECT_EQ(sweep_grid(c.strategy, L).size(), 2 * L + L * L + 2);
  RunContext ctx = RunContext::make(c);
  const auto entries = sweep_layers(c, ctx);
  ASSERT_EQ(entries.size(), 2 * L + L * L + 2);
  std::ostringstream csv;
  write_sweep_csv(csv, entries);
  EXPECT_EQ(count_lines(csv.str()), entries.size() + 1);

  const HeadConfig head = c.head();
  std::size_t prev = 0;
  for (const auto& e : entries) {
    EXPECT_EQ(e.report.params.trainable(), count_learnable_params(e.strategy, ctx.backbone.config(), &head).trainable());
    if (e.strategy.kind != StrategyKind::FineTuneTop) continue;
    EXPECT_GE(e.report.params.trainable(), prev);
    prev = e.report.params.trainable();
  }
}

TEST(Report, AblationRowsAndSingleSeedDeviation) {
  RunConfig c = tiny_config(TaskKind::FrameContent);
  c.steps = 1;
  c.strategy.l_adapter.embed_dim = 8;
  c.strategy.l_adapter.skip_bottleneck = 8;
  RunContext ctx = RunContext::make(c);
  const auto rows = ablate_l_config(c, ctx);
  ASSERT_EQ(rows.size(), 8u);
  const std::vector<std::size_t> table{12, 18432, 18432, 4724736, 4724736, 4737024, 4737024, 4749312};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].reference_params, table[i]);
    EXPECT_EQ(rows[i].stddev, 0.0);
    EXPECT_EQ(rows[i].metrics.size() + rows[i].diverged, 1u);
  }
  std::ostringstream csv;
  write_ablation_csv(csv, rows);
  EXPECT_EQ(count_lines(csv.str()), 9u);
  EXPECT_NE(csv.str().find("\"FC+LN\""), std::string::npos);
  EXPECT_NE(csv.str().find(",4.74M,"), std::string::npos);
}

TEST(Report, LrGridShapeAndIdentitySelection) {
  RunConfig c = tiny_config(TaskKind::UtteranceClass);
  c.steps = 1;
  c.task.eval_size = 4;
  c.seeds = {0, 1};
  RunContext ctx = RunContext::make(c);
  const std::vector<AdaptationStrategy> strategies{AdaptationStrategy::fine_tune_top(1),
                                                   AdaptationStrategy::l_adapters_only()};
  const auto result = lr_grid_search(c, strategies, kLearningRateGrid, ctx);
  EXPECT_EQ(result.cells.size(), kLearningRateGrid.size() * strategies.size() * c.seeds.size());
  std::ostringstream csv;
  write_lrgrid_csv(csv, result);
  EXPECT_EQ(count_lines(csv.str()), result.cells.size() + 1);

  const auto single = lr_grid_search(c, strategies, {5e-4}, ctx);
  for (const auto& [label, lr] : single.best_lr) {
    ASSERT_TRUE(lr.has_value()) << label;
    EXPECT_EQ(*lr, 5e-4);
  }
  EXPECT_THROW(lr_grid_search(c, strategies, {}, ctx), ConfigError);
}

TEST(Report, ParallelWorkersMatchSerial) {
  RunConfig c = tiny_config(TaskKind::FrameContent);
  c.seeds = {0, 1, 2};
  RunContext serial = RunContext::make(c, 1), parallel = RunContext::make(c, 3);
  const std::vector<AdaptationStrategy> strategies{AdaptationStrategy::l_adapters_only()};
  const auto a = run_strategies(c, strategies, serial), b = run_strategies(c, strategies, parallel);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].report.loss_trajectory, b[i].report.loss_trajectory);
}

TEST(Report, UntrainedWeightsUniformAndCsvSumsToOne) {
  RunConfig c = tiny_config(TaskKind::FrameContent);
  const Backbone<float> backbone = obtain_backbone(c.backbone, c.task);
  Rng rng(0);
  AdaptedModel<float> model(backbone.deep_copy(), AdaptationStrategy::l_adapters_only(), c.head(), rng);
  const auto report = layer_weight_report(model);
  for (double w : report.weights) EXPECT_NEAR(w, 0.25, 1e-12);
  EXPECT_NEAR(report.centroid, (0.25 * (1 + 2 + 3 + 4)) / 4.0, 1e-12);

  c.steps = 20;
  c.strategy = AdaptationStrategy::l_adapters_only();
  const RunReport r = train(c, 0);
  std::ostringstream csv;
  write_weights_csv(csv, layer_weight_report(r, 4));
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "layer,weight");
  double total = 0.0;
  std::size_t rows = 0;
  while (std::getline(in, line)) total += std::stod(line.substr(line.find(',') + 1)), ++rows;
  EXPECT_EQ(rows, 4u);
  EXPECT_NEAR(total, 1.0, 1e-9);

  std::ostringstream svg;
  write_weights_svg(svg, layer_weight_report(r, 4), "frame-content");
  EXPECT_EQ(svg.str().rfind("<svg", 0), 0u);
  EXPECT_EQ(count_lines(svg.str()) > 4, true);
}

TEST(Report, WeightReportRequiresLayerWeights) {
  RunConfig c = tiny_config(TaskKind::FrameContent);
  Rng rng(0);
  AdaptedModel<float> model(obtain_backbone(c.backbone, c.task), AdaptationStrategy::e_adapters_only(), c.head(), rng);
  EXPECT_THROW(layer_weight_report(model), ConfigError);
  c.strategy = AdaptationStrategy::fine_tune_top(1);
  EXPECT_THROW(layer_weight_report(train(c, 0), 4), ConfigError);
}

TEST(Report, CentroidAndMeanStddev) {
  EXPECT_DOUBLE_EQ(weight_centroid({0, 1, 2, 3}, {0, 0, 0, 1}, 4), 1.0);
  EXPECT_DOUBLE_EQ(weight_centroid({2, 3}, {0.5, 0.5}, 4), 3.5 / 4.0);
  const auto [m, s] = mean_stddev({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m, 2.5);
  EXPECT_NEAR(s, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(mean_stddev({7.0}).second, 0.0);
}
