#pragma once

#include <string>

#include "ladapt/backbone/layers.hpp"
#include "ladapt/heads/ctc.hpp"

namespace ladapt {

/// Per-frame projection to V labels plus blank.
template <typename T>
struct CtcHead {
  Linear<T> fc;

  static CtcHead init(std::size_t input_dim, std::size_t vocab_size, Rng& rng);

  /// h [T x input_dim] -> logits [T x (V+1)].
  Var<T> operator()(const Var<T>& h) const { return fc(h); }
  std::size_t vocab_size() const { return fc.out_features() - 1; }
  std::size_t param_count() const { return fc.param_count(); }
  void collect(const std::string& prefix, ParameterSet<T>& params) const;
};

template <typename T>
struct ClsOutput {
  Var<T> logits;     // [C]
  Var<T> embedding;  // [hidden], time-pooled fc1 output
};

/// fc1 per frame, average over time, fc2.
template <typename T>
struct ClsHead {
  Linear<T> fc1, fc2;

  static ClsHead init(std::size_t input_dim, std::size_t hidden, std::size_t classes, Rng& rng);

  /// Throws ShapeError on an empty sequence.
  ClsOutput<T> forward(const Var<T>& h) const;
  std::size_t num_classes() const { return fc2.out_features(); }
  std::size_t param_count() const { return fc1.param_count() + fc2.param_count(); }
  void collect(const std::string& prefix, ParameterSet<T>& params) const;
};

}  // namespace ladapt
