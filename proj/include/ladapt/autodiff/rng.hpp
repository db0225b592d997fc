#pragma once

#include <cstddef>
#include <cstdint>

namespace ladapt {

/// Counter-based generator: the n-th draw is a pure function of (key, n).
/// split() derives an independent stream, so every consumer (parameter
/// init, data order, masking) gets its own reproducible sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  Rng split(std::uint64_t stream) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal (Box-Muller, no cached second value).
  double normal();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  std::uint64_t key() const { return key_; }

 private:
  Rng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace ladapt
