#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ladapt/backbone/checkpoint.hpp"
#include "ladapt/experiments/report.hpp"

using namespace ladapt;
namespace fs = std::filesystem;

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string seeds;
  std::string out;
  std::string preset;
  std::string task;
  std::string strategy;
  std::size_t k = 0, l = 0;
  std::string variant;
  long steps = -1;
  double lr = 0.0;
  std::size_t jobs = 1;
};

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
  std::vector<std::uint64_t> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad seed '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

AdaptationStrategy make_strategy(const std::string& kind, std::size_t k, std::size_t l, std::size_t num_layers) {
  switch (strategy_kind_from_string(kind)) {
    case StrategyKind::FineTuneTop: return AdaptationStrategy::fine_tune_top(l);
    case StrategyKind::Conventional: return AdaptationStrategy::conventional(l);
    case StrategyKind::Proposed: return AdaptationStrategy::proposed(k ? k : num_layers, l);
    case StrategyKind::LAdaptersOnly: return AdaptationStrategy::l_adapters_only();
    case StrategyKind::EAdaptersOnly: return AdaptationStrategy::e_adapters_only();
  }
  throw ConfigError("unknown strategy " + kind);
}

RunConfig resolve(const Common& opt) {
  RunConfig c;
  if (!opt.config.empty()) {
    c = load_run_config(opt.config);
  } else {
    c = default_run_config(opt.task.empty() ? TaskKind::FrameContent : task_kind_from_string(opt.task));
  }
  if (!opt.task.empty() && !opt.config.empty()) c.task.kind = task_kind_from_string(opt.task);
  if (!opt.preset.empty()) c.backbone.preset = opt.preset;
  if (!opt.strategy.empty()) {
    const AdaptationStrategy widths = c.strategy;
    c.strategy = make_strategy(opt.strategy, opt.k, opt.l, BackboneConfig::preset(c.backbone.preset).num_layers);
    c.strategy.l_adapter = widths.l_adapter;
    c.strategy.bottleneck_dim = widths.bottleneck_dim;
    c.strategy.activation = widths.activation;
  }
  if (!opt.variant.empty()) c.strategy.l_adapter.variant = l_adapter_variant_from_string(opt.variant);
  if (opt.steps >= 0) c.steps = static_cast<std::size_t>(opt.steps);
  if (opt.lr > 0.0) c.lr = opt.lr;
  if (!opt.seeds.empty()) c.seeds = parse_seeds(opt.seeds);
  if (!opt.out.empty()) c.out_dir = opt.out;
  c.validate();
  return c;
}

fs::path prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  body(out);
  if (!out) throw IoError("write failed for " + path.string());
  std::cout << "wrote " << path.string() << "\n";
}

void progress(const RunReport& r) {
  std::cerr << r.strategy << " seed " << r.seed << " lr " << r.lr << ": " << r.metric_name << " "
            << (r.diverged ? std::string("diverged") : std::to_string(r.final_metric)) << " (" << r.wall_seconds
            << "s)\n";
}

void write_weights(const fs::path& dir, const std::string& stem, const LayerWeightReport& w, const std::string& title) {
  write_file(dir / (stem + ".csv"), [&](std::ostream& o) { write_weights_csv(o, w); });
  write_file(dir / (stem + ".svg"), [&](std::ostream& o) { write_weights_svg(o, w, title); });
  std::cout << "centroid " << w.centroid << "\n";
}

int cmd_pretrain(const Common& opt) {
  RunConfig c = resolve(opt);
  if (!opt.seeds.empty()) c.backbone.pretrain.seed = c.seeds.front();
  const fs::path dir = prepare_out(c.out_dir);
  const auto pre = pretrain_backbone(c.backbone, c.task);
  const Checkpoint ck{pre.backbone.config(), snapshot(pre.backbone.parameters())};
  save_checkpoint(dir / "backbone.ckpt", ck);
  std::cout << "wrote " << (dir / "backbone.ckpt").string() << "\n";
  const nlohmann::json summary = {{"preset", c.backbone.preset},
                                  {"steps", c.backbone.pretrain.steps},
                                  {"heldout_loss_before", pre.result.heldout_loss_before},
                                  {"heldout_loss_after", pre.result.heldout_loss_after},
                                  {"trajectory", pre.result.trajectory}};
  write_file(dir / "pretrain.json", [&](std::ostream& o) { o << summary.dump(2) << "\n"; });
  std::cout << "heldout loss " << pre.result.heldout_loss_before << " -> " << pre.result.heldout_loss_after << "\n";
  return 0;
}

int cmd_train(const Common& opt) {
  const RunConfig c = resolve(opt);
  const fs::path dir = prepare_out(c.out_dir);
  RunContext ctx = RunContext::make(c, opt.jobs);
  ctx.on_run = progress;
  const auto entries = run_strategies(c, {c.strategy}, ctx);
  for (const auto& e : entries) {
    const std::string stem = entries.size() == 1 ? "run" : "run_seed" + std::to_string(e.report.seed);
    write_file(dir / (stem + ".json"), [&](std::ostream& o) { o << nlohmann::json(e.report).dump(2) << "\n"; });
    if (!e.report.layer_weights.empty()) {
      const std::string wstem = entries.size() == 1 ? "weights" : "weights_seed" + std::to_string(e.report.seed);
      write_weights(dir, wstem, layer_weight_report(e.report, ctx.backbone.num_layers()),
                    to_string(c.task.kind) + " " + e.report.strategy);
    }
  }
  return 0;
}

int cmd_sweep(const Common& opt) {
  const RunConfig c = resolve(opt);
  const fs::path dir = prepare_out(c.out_dir);
  RunContext ctx = RunContext::make(c, opt.jobs);
  ctx.on_run = progress;
  const auto entries = sweep_layers(c, ctx);
  write_file(dir / "sweep.csv", [&](std::ostream& o) { write_sweep_csv(o, entries); });
  return 0;
}

int cmd_ablate(const Common& opt) {
  const RunConfig c = resolve(opt);
  const fs::path dir = prepare_out(c.out_dir);
  RunContext ctx = RunContext::make(c, opt.jobs);
  ctx.on_run = progress;
  const auto rows = ablate_l_config(c, ctx);
  write_file(dir / "ablation.csv", [&](std::ostream& o) { write_ablation_csv(o, rows); });
  for (const auto& r : rows) {
    std::printf("%-7s %10s  %.4f ± %.4f\n", to_string(r.variant).c_str(), format_param_count(r.reference_params).c_str(),
                r.mean, r.stddev);
  }
  return 0;
}

int cmd_lrgrid(const Common& opt, const std::string& strategies_arg) {
  RunConfig c = resolve(opt);
  c.lr_grid = true;
  const fs::path dir = prepare_out(c.out_dir);
  RunContext ctx = RunContext::make(c, opt.jobs);
  ctx.on_run = progress;
  const std::size_t L = ctx.backbone.num_layers();
  std::vector<AdaptationStrategy> strategies;
  if (strategies_arg.empty()) {
    strategies = {AdaptationStrategy::fine_tune_top(L), AdaptationStrategy::conventional(L),
                  AdaptationStrategy::proposed(L, L - 1), AdaptationStrategy::l_adapters_only(),
                  AdaptationStrategy::e_adapters_only()};
  } else {
    std::stringstream in(strategies_arg);
    std::string name;
    while (std::getline(in, name, ',')) strategies.push_back(make_strategy(name, opt.k, opt.l ? opt.l : L - 1, L));
  }
  for (auto& s : strategies) {
    s.l_adapter = c.strategy.l_adapter;
    s.bottleneck_dim = c.strategy.bottleneck_dim;
    s.activation = c.strategy.activation;
  }
  const auto result = lr_grid_search(c, strategies, kLearningRateGrid, ctx);
  write_file(dir / "lrgrid.csv", [&](std::ostream& o) { write_lrgrid_csv(o, result); });
  write_file(dir / "lrgrid_best.csv", [&](std::ostream& o) { write_lrgrid_best_csv(o, result); });
  return 0;
}

void print_report(const std::string& label, const ParamReport& r) {
  std::cout << label << "\n"
            << "  l_adapters            " << r.l_adapters << "\n"
            << "  e_adapters            " << r.e_adapters << "\n"
            << "  conventional_adapters " << r.conventional_adapters << "\n"
            << "  layer_weights         " << r.layer_weights << "\n"
            << "  encoder_norms         " << r.encoder_norms << "\n"
            << "  encoder_layers        " << r.encoder_layers << "\n"
            << "  head                  " << r.head << "\n"
            << "  backbone              " << r.backbone << "\n"
            << "  trainable             " << r.trainable() << "\n"
            << "  total                 " << r.total() << "\n"
            << "  ratio                 " << r.ratio() << "\n"
            << "  ratio_to_backbone     " << r.ratio_to_backbone() << "\n";
}

int cmd_count_params(const Common& opt, std::size_t bottleneck, std::size_t embed_dim, std::size_t skip_bottleneck) {
  const std::string preset = opt.preset.empty() ? "toy" : opt.preset;
  const BackboneConfig cfg = BackboneConfig::preset(preset);
  const std::size_t L = cfg.num_layers;
  LAdapterConfig l_config;
  l_config.embed_dim = embed_dim ? embed_dim : l_config.embed_dim;
  l_config.skip_bottleneck = skip_bottleneck ? skip_bottleneck : l_config.skip_bottleneck;
  if (opt.strategy.empty()) {
    std::cout << "preset " << preset << ": backbone " << backbone_param_count(cfg) << "\n";
    std::cout << "L-adapter configuration, params\n";
    for (auto v : all_l_adapter_variants()) {
      LAdapterConfig row = l_config;
      row.variant = v;
      const std::size_t n = ablation_param_count(row, cfg);
      std::printf("%-7s %10zu  %s\n", to_string(v).c_str(), n, format_param_count(n).c_str());
    }
  }
  AdaptationStrategy s = opt.strategy.empty() ? AdaptationStrategy::proposed(L, L - 1)
                                              : make_strategy(opt.strategy, opt.k, opt.l, L);
  s.l_adapter = l_config;
  if (!opt.variant.empty()) s.l_adapter.variant = l_adapter_variant_from_string(opt.variant);
  if (bottleneck) s.bottleneck_dim = bottleneck;
  print_report(s.label(), count_learnable_params(s, cfg));
  return 0;
}

int cmd_weights_report(const Common& opt, const std::string& run_path) {
  if (!run_path.empty()) {
    std::ifstream in(run_path);
    if (!in) throw IoError("cannot open " + run_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(run_path + ": " + e.what());
    }
    const RunReport r = j.get<RunReport>();
    const std::string preset = opt.preset.empty() ? "toy" : opt.preset;
    const fs::path dir = prepare_out(opt.out.empty() ? fs::path(run_path).parent_path() : fs::path(opt.out));
    write_weights(dir, "weights", layer_weight_report(r, BackboneConfig::preset(preset).num_layers),
                  to_string(r.task) + " " + r.strategy);
    return 0;
  }
  RunConfig c = resolve(opt);
  if (!c.strategy.has_layer_weights()) throw ConfigError(c.strategy.label() + " has no layer weights");
  const fs::path dir = prepare_out(c.out_dir);
  RunContext ctx = RunContext::make(c, opt.jobs);
  ctx.on_run = progress;
  const auto entries = run_strategies(c, {c.strategy}, ctx);
  for (const auto& e : entries) {
    write_weights(dir, "weights_seed" + std::to_string(e.report.seed),
                  layer_weight_report(e.report, ctx.backbone.num_layers()),
                  to_string(c.task.kind) + " " + e.report.strategy + " seed " + std::to_string(e.report.seed));
  }
  return 0;
}

void add_common(CLI::App* app, Common& opt, bool training) {
  app->add_option("--config", opt.config, "run config JSON");
  app->add_option("--seed", opt.seeds, "comma-separated seed list");
  app->add_option("--out", opt.out, "output directory");
  app->add_option("--preset", opt.preset, "backbone preset")->check(CLI::IsMember({"toy", "wavlm-base"}));
  app->add_option("--strategy", opt.strategy, "finetune, conventional, proposed, l-only, e-only");
  app->add_option("--k", opt.k, "L-adapter layers for proposed");
  app->add_option("--l", opt.l, "layers for finetune/conventional, E-adapters for proposed");
  app->add_option("--variant", opt.variant, "L-adapter variant");
  if (training) {
    app->add_option("--task", opt.task, "frame-content, utterance-speaker, utterance-class");
    app->add_option("--steps", opt.steps, "training steps");
    app->add_option("--lr", opt.lr, "learning rate");
    app->add_option("--jobs", opt.jobs, "parallel runs")->check(CLI::PositiveNumber);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layer-adapter experiments on a toy speech encoder"};
  app.require_subcommand(1);
  Common opt;
  std::string strategies_arg, run_path;
  std::size_t bottleneck = 0, embed_dim = 0, skip_bottleneck = 0;

  auto* pretrain = app.add_subcommand("pretrain", "pretrain and save a frozen backbone checkpoint");
  auto* train_cmd = app.add_subcommand("train", "one strategy, every seed");
  auto* sweep = app.add_subcommand("sweep", "layer sweep over all strategies");
  auto* ablate = app.add_subcommand("ablate", "L-adapter configuration ablation");
  auto* lrgrid = app.add_subcommand("lrgrid", "learning-rate grid per strategy");
  auto* count = app.add_subcommand("count-params", "exact parameter counts, no training");
  auto* weights = app.add_subcommand("weights-report", "layer-weight CSV, SVG and centroid");
  for (auto* sub : {pretrain, train_cmd, sweep, ablate, lrgrid, weights}) add_common(sub, opt, true);
  add_common(count, opt, false);
  lrgrid->add_option("--strategies", strategies_arg, "comma-separated strategy kinds");
  count->add_option("--bottleneck", bottleneck, "E/conventional adapter width");
  count->add_option("--embed-dim", embed_dim, "L-adapter FC width");
  count->add_option("--skip-bottleneck", skip_bottleneck, "Skip variant width");
  weights->add_option("--run", run_path, "existing run.json instead of training");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*pretrain) return cmd_pretrain(opt);
    if (*train_cmd) return cmd_train(opt);
    if (*sweep) return cmd_sweep(opt);
    if (*ablate) return cmd_ablate(opt);
    if (*lrgrid) return cmd_lrgrid(opt, strategies_arg);
    if (*count) return cmd_count_params(opt, bottleneck, embed_dim, skip_bottleneck);
    if (*weights) return cmd_weights_report(opt, run_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
