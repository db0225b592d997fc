#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ladapt/autodiff/tensor.hpp"

namespace ladapt {

/// Backward rule of an operation: receives the gradient flowing into the
/// operation's output and one accumulation buffer per operand (nullptr for
/// operands that do not require a gradient). Rules must add, not assign.
template <typename T>
using BackwardRule = std::function<void(const Tensor<T>& grad_out, std::vector<Tensor<T>*>& grads)>;

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until a backward pass reaches this node
  bool has_grad = false;
  bool requires_grad = false;
  bool is_leaf = true;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardRule<T> rule;
  std::string op;
};

namespace detail {
bool& grad_mode_disabled();
}

/// While alive, operations on the current thread record no graph.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_disabled()) { detail::grad_mode_disabled() = true; }
  ~NoGradGuard() { detail::grad_mode_disabled() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline bool grad_enabled() { return !detail::grad_mode_disabled(); }

/// Handle to a node of the reverse-mode graph. Copies share the node.
template <typename T>
class Var {
 public:
  Var() = default;

  static Var leaf(Tensor<T> value, bool requires_grad);
  static Var constant(Tensor<T> value) { return leaf(std::move(value), false); }

  const Tensor<T>& value() const { return node_->value; }
  /// Mutable access for optimizers and initializers; leaves only.
  Tensor<T>& mutable_value();
  const Shape& shape() const { return node_->value.shape(); }

  /// Gradient after backward(); nullptr when this node received none.
  const Tensor<T>* grad() const { return node_->has_grad ? &node_->grad : nullptr; }
  void zero_grad();

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  bool is_leaf() const { return node_->is_leaf; }
  bool valid() const { return static_cast<bool>(node_); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Records an operation result. The rule is stored only when grad mode is
/// on and some operand requires a gradient. Throws NonFiniteError if the
/// value contains NaN/Inf.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> operands, BackwardRule<T> rule,
                   const char* op);

/// Runs the backward pass from a scalar loss, accumulating into the grad of
/// every leaf that requires one. The graph is released afterwards; a second
/// call on the same loss throws StaleGraphError.
template <typename T>
void backward(const Var<T>& loss);

}  // namespace ladapt
