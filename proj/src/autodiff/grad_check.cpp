#include "ladapt/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ladapt {

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(1e-12, std::abs(a) + std::abs(b));
}

namespace {
double eval(const std::function<Var<double>()>& f) {
  NoGradGuard guard;
  const double v = f().value().item();
  if (!std::isfinite(v)) throw NonFiniteError("grad_check: objective is not finite");
  return v;
}
}  // namespace

GradCheckResult grad_check(const std::function<Var<double>()>& f, std::vector<Var<double>> params,
                           const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ConfigError("grad_check: step must be positive");
  for (auto& p : params) p.zero_grad();
  Var<double> loss = f();
  if (!std::isfinite(loss.value().item())) throw NonFiniteError("grad_check: objective is not finite");
  backward(loss);

  std::vector<Tensor<double>> analytic;
  for (const auto& p : params) {
    analytic.push_back(p.grad() ? *p.grad() : Tensor<double>(p.shape(), 0.0));
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  std::size_t total = 0;
  for (const auto& p : params) total += p.value().numel();
  if (options.max_coordinates == 0 || options.max_coordinates >= total) {
    for (std::size_t i = 0; i < params.size(); ++i)
      for (std::size_t j = 0; j < params[i].value().numel(); ++j) coords.emplace_back(i, j);
  } else {
    Rng rng(options.seed);
    for (std::size_t c = 0; c < options.max_coordinates; ++c) {
      std::size_t flat = rng.below(total);
      std::size_t i = 0;
      while (flat >= params[i].value().numel()) flat -= params[i++].value().numel();
      coords.emplace_back(i, flat);
    }
  }

  GradCheckResult result;
  for (auto [i, j] : coords) {
    double& slot = params[i].mutable_value()[j];
    const double original = slot;
    const double h = options.step * std::max(1.0, std::abs(original));
    slot = original + h;
    const double up = eval(f);
    slot = original - h;
    const double down = eval(f);
    slot = original;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[i][j];
    const double err = relative_error(a, numeric);
    ++result.coordinates_checked;
    if (err > result.max_relative_error || result.coordinates_checked == 1) {
      result.max_relative_error = std::max(result.max_relative_error, err);
      if (err >= result.max_relative_error) {
        result.worst_param = i;
        result.worst_index = j;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace ladapt
