#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "ladapt/autodiff/var.hpp"

namespace ladapt {

inline constexpr std::size_t kBlank = 0;

/// Target needs more frames than the input provides.
class InfeasibleTargetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Frames needed to emit target: one per label plus a blank between repeats.
std::size_t ctc_min_frames(std::span<const std::size_t> target);

/// Negative log-likelihood of target under logits [T x (V+1)], summed over
/// every blank-augmented alignment. Index 0 is blank, labels are 1..V.
/// Throws InfeasibleTargetError when T < ctc_min_frames(target) and
/// ConfigError for labels outside 1..V.
template <typename T>
Var<T> ctc_loss(const Var<T>& logits, std::span<const std::size_t> target);

/// Per-frame argmax (lowest index on ties), collapse repeats, drop blanks.
template <typename T>
std::vector<std::size_t> ctc_greedy_decode(const Tensor<T>& logits);

}  // namespace ladapt
