#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ladapt/experiments/train.hpp"

namespace ladapt {

/// Shared inputs of a family of runs. Each run deep-copies the backbone.
struct RunContext {
  Backbone<float> backbone;
  Dataset data;
  std::size_t jobs = 1;  // parallel workers
  /// Called once per finished run, serialized.
  std::function<void(const RunReport&)> on_run;

  static RunContext make(const RunConfig& config, std::size_t jobs = 1);
};

struct SweepEntry {
  AdaptationStrategy strategy;
  RunReport report;
};

/// FineTuneTop(l) and Conventional(l) for l = 1..L, Proposed(k, l) for
/// k = 1..L and l = 0..L-1, then LAdaptersOnly and EAdaptersOnly. Adapter
/// widths and L-adapter config come from `base`.
std::vector<AdaptationStrategy> sweep_grid(const AdaptationStrategy& base, std::size_t num_layers);

/// Every strategy in the grid for every seed in the config.
std::vector<SweepEntry> sweep_layers(const RunConfig& base, RunContext& context);
std::vector<SweepEntry> run_strategies(const RunConfig& base, const std::vector<AdaptationStrategy>& strategies,
                                       RunContext& context);

/// strategy,kind,k,l,seed,lr,trainable,total,ratio,initial_metric,final_metric,final_loss,diverged.
/// Divergent rows carry NA in the metric and loss columns.
void write_sweep_csv(std::ostream& out, const std::vector<SweepEntry>& entries);

struct AblationRow {
  LAdapterVariant variant;
  std::size_t params = 0;             // L-adapter scalars at the run's preset
  std::size_t reference_params = 0;   // same column at wavlm-base
  std::vector<double> metrics;        // final metric per converged seed
  std::size_t diverged = 0;
  double mean = 0.0;
  double stddev = 0.0;                // sample deviation, 0 for one seed
};

/// LAdaptersOnly with each of the eight variants, every seed.
std::vector<AblationRow> ablate_l_config(const RunConfig& base, RunContext& context);

/// variant,params,params_wavlm_base,params_wavlm_base_fmt,mean,std,runs,diverged.
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

struct LrCell {
  std::string strategy;
  double lr = 0.0;
  RunReport report;
};

struct LrGridResult {
  std::vector<LrCell> cells;
  /// Rate with the lowest mean final metric among rates where no seed
  /// diverged; absent when every rate had a divergent seed.
  std::map<std::string, std::optional<double>> best_lr;
};

/// Every strategy at every rate in `grid` for every seed.
LrGridResult lr_grid_search(const RunConfig& base, const std::vector<AdaptationStrategy>& strategies,
                            const std::vector<double>& grid, RunContext& context);

/// strategy,lr,seed,initial_loss,final_loss,initial_train_loss,final_train_loss,final_metric,converged,diverged.
/// The loss pair is eval-set, the train pair decides convergence.
void write_lrgrid_csv(std::ostream& out, const LrGridResult& result);
/// strategy,best_lr,mean_metric.
void write_lrgrid_best_csv(std::ostream& out, const LrGridResult& result);

struct LayerWeightReport {
  std::vector<std::size_t> layers;  // 0-based encoder layer indices
  std::vector<double> weights;
  std::size_t num_layers = 0;
  double centroid = 0.0;
};

/// Throws ConfigError when the model or run has no layer weights.
LayerWeightReport layer_weight_report(const AdaptedModel<float>& model);
LayerWeightReport layer_weight_report(const RunReport& report, std::size_t num_layers);

/// layer,weight with 1-based layer numbers.
void write_weights_csv(std::ostream& out, const LayerWeightReport& report);
void write_weights_svg(std::ostream& out, const LayerWeightReport& report, const std::string& title);

/// Mean and sample standard deviation; 0 deviation for fewer than two values.
std::pair<double, double> mean_stddev(const std::vector<double>& values);

}  // namespace ladapt
