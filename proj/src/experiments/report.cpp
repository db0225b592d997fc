#include "ladapt/experiments/report.hpp"

#include <atomic>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace ladapt {

RunContext RunContext::make(const RunConfig& config, std::size_t jobs) {
  config.validate();
  return RunContext{obtain_backbone(config.backbone, config.task), generate_task(config.task, config.task.seed),
                    jobs == 0 ? 1 : jobs, {}};
}

namespace {

struct Job {
  RunConfig config;
  std::uint64_t seed;
};

std::vector<RunReport> run_jobs(const std::vector<Job>& jobs, RunContext& context) {
  std::vector<RunReport> out(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        out[i] = train(jobs[i].config, jobs[i].seed, context.backbone, context.data);
        std::lock_guard lock(mutex);
        if (context.on_run) context.on_run(out[i]);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!error) error = std::current_exception();
        next = jobs.size();
      }
    }
  };
  const std::size_t workers = std::min(context.jobs, jobs.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
  return out;
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "NA";
  std::ostringstream s;
  s << std::setprecision(9) << v;
  return s.str();
}

}  // namespace

std::pair<double, double> mean_stddev(const std::vector<double>& values) {
  if (values.empty()) return {std::nan(""), std::nan("")};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

// ---------------------------------------------------------------------------
// Sweep

std::vector<AdaptationStrategy> sweep_grid(const AdaptationStrategy& base, std::size_t num_layers) {
  auto with_widths = [&](AdaptationStrategy s) {
    s.l_adapter = base.l_adapter;
    s.bottleneck_dim = base.bottleneck_dim;
    s.activation = base.activation;
    return s;
  };
  std::vector<AdaptationStrategy> grid;
  for (std::size_t l = 1; l <= num_layers; ++l) grid.push_back(with_widths(AdaptationStrategy::fine_tune_top(l)));
  for (std::size_t l = 1; l <= num_layers; ++l) grid.push_back(with_widths(AdaptationStrategy::conventional(l)));
  for (std::size_t k = 1; k <= num_layers; ++k)
    for (std::size_t l = 0; l < num_layers; ++l) grid.push_back(with_widths(AdaptationStrategy::proposed(k, l)));
  grid.push_back(with_widths(AdaptationStrategy::l_adapters_only()));
  grid.push_back(with_widths(AdaptationStrategy::e_adapters_only()));
  return grid;
}

std::vector<SweepEntry> run_strategies(const RunConfig& base, const std::vector<AdaptationStrategy>& strategies,
                                       RunContext& context) {
  std::vector<Job> jobs;
  std::vector<AdaptationStrategy> owners;
  for (const auto& s : strategies) {
    s.validate(context.backbone.num_layers());
    for (std::uint64_t seed : base.seeds) {
      RunConfig c = base;
      c.strategy = s;
      jobs.push_back({c, seed});
      owners.push_back(s);
    }
  }
  auto reports = run_jobs(jobs, context);
  std::vector<SweepEntry> out;
  for (std::size_t i = 0; i < reports.size(); ++i) out.push_back({owners[i], std::move(reports[i])});
  return out;
}

std::vector<SweepEntry> sweep_layers(const RunConfig& base, RunContext& context) {
  return run_strategies(base, sweep_grid(base.strategy, context.backbone.num_layers()), context);
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepEntry>& entries) {
  out << "strategy,kind,k,l,seed,lr,trainable,total,ratio,initial_metric,final_metric,final_loss,diverged\n";
  for (const auto& e : entries) {
    const auto& r = e.report;
    const bool k_used = e.strategy.kind == StrategyKind::Proposed;
    out << '"' << r.strategy << "\"," << to_string(e.strategy.kind) << ',' << (k_used ? std::to_string(e.strategy.k) : "")
        << ',' << e.strategy.l << ',' << r.seed << ',' << fmt(r.lr) << ',' << r.params.trainable() << ','
        << r.params.total() << ',' << fmt(r.params.ratio()) << ',' << fmt(r.initial_metric) << ','
        << (r.diverged ? "NA" : fmt(r.final_metric)) << ',' << (r.diverged ? "NA" : fmt(r.final_loss)) << ','
        << (r.diverged ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Ablation

std::vector<AblationRow> ablate_l_config(const RunConfig& base, RunContext& context) {
  std::vector<AdaptationStrategy> strategies;
  for (auto v : all_l_adapter_variants()) {
    AdaptationStrategy s = AdaptationStrategy::l_adapters_only();
    s.l_adapter = base.strategy.l_adapter;
    s.l_adapter.variant = v;
    s.bottleneck_dim = base.strategy.bottleneck_dim;
    s.activation = base.strategy.activation;
    strategies.push_back(s);
  }
  const auto entries = run_strategies(base, strategies, context);
  const BackboneConfig reference = BackboneConfig::preset("wavlm-base");
  LAdapterConfig reference_l;
  std::vector<AblationRow> rows;
  for (const auto& s : strategies) {
    AblationRow row;
    row.variant = s.l_adapter.variant;
    row.params = ablation_param_count(s.l_adapter, context.backbone.config());
    reference_l.variant = row.variant;
    row.reference_params = ablation_param_count(reference_l, reference);
    for (const auto& e : entries) {
      if (e.strategy.l_adapter.variant != row.variant) continue;
      if (e.report.diverged) ++row.diverged;
      else row.metrics.push_back(e.report.final_metric);
    }
    std::tie(row.mean, row.stddev) = mean_stddev(row.metrics);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "variant,params,params_wavlm_base,params_wavlm_base_fmt,mean,std,runs,diverged\n";
  for (const auto& r : rows) {
    out << '"' << to_string(r.variant) << "\"," << r.params << ',' << r.reference_params << ','
        << format_param_count(r.reference_params) << ',' << fmt(r.mean) << ',' << fmt(r.stddev) << ','
        << r.metrics.size() + r.diverged << ',' << r.diverged << '\n';
  }
}

// ---------------------------------------------------------------------------
// Learning-rate grid

LrGridResult lr_grid_search(const RunConfig& base, const std::vector<AdaptationStrategy>& strategies,
                            const std::vector<double>& grid, RunContext& context) {
  if (grid.empty()) throw ConfigError("lr grid is empty");
  std::vector<Job> jobs;
  for (const auto& s : strategies) {
    s.validate(context.backbone.num_layers());
    for (double lr : grid) {
      for (std::uint64_t seed : base.seeds) {
        RunConfig c = base;
        c.strategy = s;
        c.lr = lr;
        c.validate();
        jobs.push_back({c, seed});
      }
    }
  }
  auto reports = run_jobs(jobs, context);
  LrGridResult result;
  for (std::size_t i = 0; i < reports.size(); ++i)
    result.cells.push_back({jobs[i].config.strategy.label(), jobs[i].config.lr, std::move(reports[i])});

  for (const auto& s : strategies) {
    const std::string label = s.label();
    std::optional<double> best;
    double best_metric = 0.0;
    for (double lr : grid) {
      std::vector<double> metrics;
      bool any_diverged = false;
      for (const auto& c : result.cells) {
        if (c.strategy != label || c.lr != lr) continue;
        if (c.report.diverged) any_diverged = true;
        else metrics.push_back(c.report.final_metric);
      }
      if (any_diverged || metrics.empty()) continue;
      const double m = mean_stddev(metrics).first;
      if (!best || m < best_metric) best = lr, best_metric = m;
    }
    result.best_lr[label] = best;
  }
  return result;
}

void write_lrgrid_csv(std::ostream& out, const LrGridResult& result) {
  out << "strategy,lr,seed,initial_loss,final_loss,initial_train_loss,final_train_loss,final_metric,converged,diverged\n";
  for (const auto& c : result.cells) {
    const auto& r = c.report;
    out << '"' << c.strategy << "\"," << fmt(c.lr) << ',' << r.seed << ',' << fmt(r.initial_loss) << ','
        << (r.diverged ? "NA" : fmt(r.final_loss)) << ',' << fmt(r.initial_train_loss) << ','
        << (r.diverged ? "NA" : fmt(r.final_train_loss)) << ',' << (r.diverged ? "NA" : fmt(r.final_metric)) << ','
        << (r.converged() ? 1 : 0) << ',' << (r.diverged ? 1 : 0) << '\n';
  }
}

void write_lrgrid_best_csv(std::ostream& out, const LrGridResult& result) {
  out << "strategy,best_lr,mean_metric\n";
  for (const auto& [label, lr] : result.best_lr) {
    std::vector<double> metrics;
    if (lr)
      for (const auto& c : result.cells)
        if (c.strategy == label && c.lr == *lr) metrics.push_back(c.report.final_metric);
    out << '"' << label << "\"," << (lr ? fmt(*lr) : "NA") << ',' << (lr ? fmt(mean_stddev(metrics).first) : "NA")
        << '\n';
  }
}

// ---------------------------------------------------------------------------
// Layer weights

LayerWeightReport layer_weight_report(const AdaptedModel<float>& model) {
  if (!model.has_layer_weights()) throw ConfigError(model.strategy().label() + " has no layer weights");
  LayerWeightReport r;
  r.layers = model.weighted_layers();
  r.weights = model.layer_weights();
  r.num_layers = model.backbone().num_layers();
  r.centroid = weight_centroid(r.layers, r.weights, r.num_layers);
  return r;
}

LayerWeightReport layer_weight_report(const RunReport& report, std::size_t num_layers) {
  if (report.layer_weights.empty()) throw ConfigError(report.strategy + " has no layer weights");
  LayerWeightReport r;
  r.layers = report.weighted_layers;
  r.weights = report.layer_weights;
  r.num_layers = num_layers;
  r.centroid = weight_centroid(r.layers, r.weights, num_layers);
  return r;
}

void write_weights_csv(std::ostream& out, const LayerWeightReport& report) {
  out << "layer,weight\n";
  for (std::size_t i = 0; i < report.layers.size(); ++i)
    out << report.layers[i] + 1 << ',' << std::setprecision(17) << report.weights[i] << '\n';
}

void write_weights_svg(std::ostream& out, const LayerWeightReport& report, const std::string& title) {
  const double width = 480, height = 280, left = 50, bottom = 40, top = 40;
  const double plot_w = width - left - 20, plot_h = height - bottom - top;
  double max_w = 0.0;
  for (double w : report.weights) max_w = std::max(max_w, w);
  if (max_w <= 0.0) max_w = 1.0;
  const double slot = plot_w / static_cast<double>(std::max<std::size_t>(report.weights.size(), 1));
  out << std::fixed << std::setprecision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << title << " (centroid " << std::setprecision(4) << report.centroid << std::setprecision(2) << ")</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - 20 << "\" y2=\""
      << height - bottom << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < report.weights.size(); ++i) {
    const double h = plot_h * report.weights[i] / max_w;
    const double x = left + slot * static_cast<double>(i) + slot * 0.15;
    out << "<rect x=\"" << x << "\" y=\"" << height - bottom - h << "\" width=\"" << slot * 0.7 << "\" height=\"" << h
        << "\" fill=\"steelblue\"/>\n";
    out << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << height - bottom + 15
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << report.layers[i] + 1
        << "</text>\n";
    out << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << height - bottom - h - 4
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << std::setprecision(3)
        << report.weights[i] << std::setprecision(2) << "</text>\n";
  }
  out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 8
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">layer</text>\n";
  out << "</svg>\n";
}

}  // namespace ladapt
