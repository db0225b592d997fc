#pragma once

#include <stdexcept>
#include <string>

namespace ladapt {

/// Operand shapes do not satisfy an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// A NaN or Inf appeared in a tensor produced by an operation.
class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(const std::string& what) : std::runtime_error(what) {}
};

/// backward() was called on a graph whose backward pass already ran.
class StaleGraphError : public std::logic_error {
 public:
  explicit StaleGraphError(const std::string& what) : std::logic_error(what) {}
};

/// Invalid configuration, out-of-range index or other precondition failure.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace ladapt
