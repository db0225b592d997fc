#include "ladapt/autodiff/var.hpp"

#include <unordered_set>

namespace ladapt {

namespace detail {
bool& grad_mode_disabled() {
  thread_local bool disabled = false;
  return disabled;
}
}  // namespace detail

template <typename T>
Var<T> Var<T>::leaf(Tensor<T> value, bool requires_grad) {
  if (!value.all_finite()) throw NonFiniteError("leaf tensor contains non-finite values");
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->op = "leaf";
  return Var(std::move(node));
}

template <typename T>
Tensor<T>& Var<T>::mutable_value() {
  if (!node_->is_leaf) throw std::logic_error("mutable_value() on a non-leaf tensor");
  return node_->value;
}

template <typename T>
void Var<T>::zero_grad() {
  node_->grad = Tensor<T>();
  node_->has_grad = false;
}

template <typename T>
void Var<T>::set_requires_grad(bool on) {
  if (!node_->is_leaf) throw std::logic_error("set_requires_grad() on a non-leaf tensor");
  node_->requires_grad = on;
  if (!on) zero_grad();
}

template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> operands, BackwardRule<T> rule,
                   const char* op) {
  if (!value.all_finite()) {
    throw NonFiniteError(std::string("non-finite output from ") + op);
  }
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->is_leaf = false;
  node->op = op;
  if (grad_enabled()) {
    bool any = false;
    for (const auto& v : operands) any = any || v.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(operands.size());
      for (auto& v : operands) node->parents.push_back(v.node());
      node->rule = std::move(rule);
    }
  }
  return Var<T>(std::move(node));
}

template <typename T>
void backward(const Var<T>& loss) {
  Node<T>* root = loss.node().get();
  if (root->consumed) throw StaleGraphError("backward() called twice on the same graph");
  if (root->value.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_str(root->value.shape()));
  }
  if (!root->requires_grad) {
    root->consumed = !root->is_leaf;
    return;
  }

  // Iterative post-order DFS over nodes that require a gradient.
  // Owning pointers: releasing a node's parents must not free queued nodes.
  std::vector<std::shared_ptr<Node<T>>> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<std::shared_ptr<Node<T>>, std::size_t>> stack{{loss.node(), 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& top = stack.back();
    Node<T>* n = top.first.get();
    if (!n->is_leaf && n->consumed) throw StaleGraphError("graph node reused after backward()");
    if (top.second < n->parents.size()) {
      auto p = n->parents[top.second++];
      if (p->requires_grad && seen.insert(p.get()).second) stack.emplace_back(std::move(p), 0);
    } else {
      order.push_back(std::move(top.first));
      stack.pop_back();
    }
  }

  root->grad = Tensor<T>(root->value.shape(), T{1});
  root->has_grad = true;

  std::vector<Tensor<T>*> sinks;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = it->get();
    if (n->is_leaf) continue;
    if (n->has_grad) {
      sinks.assign(n->parents.size(), nullptr);
      for (std::size_t i = 0; i < n->parents.size(); ++i) {
        Node<T>* p = n->parents[i].get();
        if (!p->requires_grad) continue;
        if (!p->has_grad) {
          p->grad = Tensor<T>(p->value.shape(), T{0});
          p->has_grad = true;
        }
        sinks[i] = &p->grad;
      }
      n->rule(n->grad, sinks);
    }
    n->consumed = true;
    n->rule = nullptr;
    n->parents.clear();
    n->grad = Tensor<T>();
    n->has_grad = false;
  }
}

template class Var<float>;
template class Var<double>;
template Var<float> make_result(Tensor<float>, std::vector<Var<float>>, BackwardRule<float>,
                                const char*);
template Var<double> make_result(Tensor<double>, std::vector<Var<double>>, BackwardRule<double>,
                                 const char*);
template void backward(const Var<float>&);
template void backward(const Var<double>&);

}  // namespace ladapt
