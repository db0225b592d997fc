#include "ladapt/autodiff/parameters.hpp"

#include <cstring>

namespace ladapt {

namespace {
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv(std::uint64_t& h, const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}
}  // namespace

template <typename T>
void ParameterSet<T>::add(std::string name, Var<T> var) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  index_[name] = entries_.size();
  entries_.push_back({std::move(name), std::move(var)});
}

template <typename T>
const Var<T>& ParameterSet<T>::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second].var;
}

template <typename T>
bool ParameterSet<T>::contains(const std::string& name) const {
  return index_.count(name) > 0;
}

template <typename T>
std::size_t ParameterSet<T>::total_scalars() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.var.value().numel();
  return n;
}

template <typename T>
std::size_t ParameterSet<T>::trainable_scalars() const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.var.requires_grad()) n += e.var.value().numel();
  return n;
}

template <typename T>
std::vector<NamedParameter<T>> ParameterSet<T>::trainable() const {
  std::vector<NamedParameter<T>> out;
  for (const auto& e : entries_)
    if (e.var.requires_grad()) out.push_back(e);
  return out;
}

template <typename T>
std::vector<NamedParameter<T>> ParameterSet<T>::frozen() const {
  std::vector<NamedParameter<T>> out;
  for (const auto& e : entries_)
    if (!e.var.requires_grad()) out.push_back(e);
  return out;
}

template <typename T>
void ParameterSet<T>::freeze_all() {
  for (auto& e : entries_) e.var.set_requires_grad(false);
}

template <typename T>
void ParameterSet<T>::unfreeze_all() {
  for (auto& e : entries_) e.var.set_requires_grad(true);
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

template <typename T>
std::uint64_t ParameterSet<T>::frozen_hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& e : entries_) {
    if (e.var.requires_grad()) continue;
    fnv(h, e.name.data(), e.name.size());
    const auto d = e.var.value().data();
    fnv(h, d.data(), d.size_bytes());
  }
  return h;
}

template <typename T>
ParameterValues snapshot(const ParameterSet<T>& params) {
  ParameterValues out;
  for (const auto& e : params.entries()) out.emplace(e.name, e.var.value().template cast<double>());
  return out;
}

template <typename T>
void load(ParameterSet<T>& params, const ParameterValues& values, bool require_all) {
  for (const auto& e : params.entries()) {
    auto it = values.find(e.name);
    if (it == values.end()) {
      if (require_all) throw ConfigError("missing parameter '" + e.name + "'");
      continue;
    }
    Var<T> var = e.var;
    Tensor<T>& dst = var.mutable_value();
    if (dst.shape() != it->second.shape()) {
      throw ConfigError("parameter '" + e.name + "' has shape " + shape_str(dst.shape()) +
                        " but source has " + shape_str(it->second.shape()));
    }
    dst = it->second.template cast<T>();
  }
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template ParameterValues snapshot(const ParameterSet<float>&);
template ParameterValues snapshot(const ParameterSet<double>&);
template void load(ParameterSet<float>&, const ParameterValues&, bool);
template void load(ParameterSet<double>&, const ParameterValues&, bool);

}  // namespace ladapt
