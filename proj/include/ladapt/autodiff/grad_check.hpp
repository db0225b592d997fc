#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ladapt/autodiff/rng.hpp"
#include "ladapt/autodiff/var.hpp"

namespace ladapt {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckOptions {
  /// Central-difference step is step * max(1, |p|).
  double step = 1e-6;
  /// 0 checks every coordinate; otherwise this many are sampled uniformly
  /// across all parameters.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

/// |a - b| / max(1e-12, |a| + |b|)
double relative_error(double a, double b);

/// Compares backward() against central differences of f at every (or a
/// sampled) coordinate of params. f must rebuild its graph on each call.
/// Throws NonFiniteError when f is non-finite.
GradCheckResult grad_check(const std::function<Var<double>()>& f, std::vector<Var<double>> params,
                           const GradCheckOptions& options = {});

}  // namespace ladapt
