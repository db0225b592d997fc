#pragma once

#include <cmath>
#include <vector>

#include "ladapt/autodiff/tensor.hpp"

namespace ladapt::testing {

/// Collapse repeats then drop blanks (index 0).
inline std::vector<std::size_t> collapse_path(const std::vector<std::size_t>& path) {
  std::vector<std::size_t> out;
  std::size_t prev = 0;
  for (std::size_t k : path) {
    if (k != 0 && k != prev) out.push_back(k);
    prev = k;
  }
  return out;
}

/// -log of the summed probability of every frame path that collapses to
/// target, by exhaustive enumeration of (V+1)^T paths. Returns +inf when no
/// path matches.
inline double ctc_brute_force(const Tensor<double>& logits, const std::vector<std::size_t>& target) {
  const std::size_t frames = logits.rows(), classes = logits.cols();
  std::vector<std::vector<double>> prob(frames, std::vector<double>(classes));
  for (std::size_t t = 0; t < frames; ++t) {
    double z = 0.0;
    for (std::size_t k = 0; k < classes; ++k) z += std::exp(logits.at(t, k));
    for (std::size_t k = 0; k < classes; ++k) prob[t][k] = std::exp(logits.at(t, k)) / z;
  }
  std::vector<std::size_t> path(frames, 0);
  double total = 0.0;
  while (true) {
    if (collapse_path(path) == target) {
      double p = 1.0;
      for (std::size_t t = 0; t < frames; ++t) p *= prob[t][path[t]];
      total += p;
    }
    std::size_t t = 0;
    while (t < frames && ++path[t] == classes) path[t++] = 0;
    if (t == frames) break;
  }
  return -std::log(total);
}

}  // namespace ladapt::testing
