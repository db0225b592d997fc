#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ladapt/autodiff/var.hpp"

namespace ladapt {

template <typename T>
struct NamedParameter {
  std::string name;
  Var<T> var;
};

/// Ordered inventory of a model's leaf parameters. Entries share nodes with
/// the model, so flipping requires_grad here freezes or unfreezes them.
template <typename T>
class ParameterSet {
 public:
  void add(std::string name, Var<T> var);

  const std::vector<NamedParameter<T>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Throws ConfigError when the name is unknown.
  const Var<T>& find(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t total_scalars() const;
  std::size_t trainable_scalars() const;
  std::vector<NamedParameter<T>> trainable() const;
  std::vector<NamedParameter<T>> frozen() const;

  void freeze_all();
  void unfreeze_all();
  void zero_grad();

  /// FNV-1a over names and raw bytes of every frozen parameter.
  std::uint64_t frozen_hash() const;

 private:
  std::vector<NamedParameter<T>> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Name -> tensor snapshot in 64-bit, the interchange format between float
/// and double models and checkpoint files.
using ParameterValues = std::map<std::string, Tensor<double>>;

template <typename T>
ParameterValues snapshot(const ParameterSet<T>& params);

/// Copies matching names into params; throws ConfigError on shape mismatch
/// and, when require_all is set, on parameters missing from values.
template <typename T>
void load(ParameterSet<T>& params, const ParameterValues& values, bool require_all);

}  // namespace ladapt
