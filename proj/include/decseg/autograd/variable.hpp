#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "decseg/core/tensor.hpp"

namespace decseg {

// Reverse-mode autodiff over a dynamically built DAG.
//
// A Node owns its forward value and (once backward runs) its gradient. Ops are
// free functions that compute a value eagerly and attach a closure that routes
// the output gradient to the inputs. Templated on the scalar so the same graph
// code runs in float for training and double for finite-difference checks.

template <class T>
class Node;

template <class T>
using Var = std::shared_ptr<Node<T>>;

template <class T>
class Node {
 public:
  explicit Node(Tensor<T> v) : value(std::move(v)) {}

  Tensor<T> value;
  Tensor<T> grad;  // undefined until first touched by backward
  bool requires_grad = false;

  // Inputs that require grad; traversal only. Backward closures capture the
  // Vars whose values they need themselves.
  std::vector<Var<T>> inputs;
  std::function<void(Node<T>&)> backward_fn;

  Tensor<T>& ensure_grad() {
    if (!grad.defined()) grad = Tensor<T>::zeros(value.shape());
    return grad;
  }

  void zero_grad() {
    if (grad.defined()) grad.zero();
  }
};

// Graph construction can be globally disabled (evaluation passes); ops then
// produce constant nodes and drop their closures, freeing inputs eagerly.
inline bool& grad_enabled() {
  thread_local bool on = true;
  return on;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_enabled()) { grad_enabled() = false; }
  ~NoGradGuard() { grad_enabled() = prev; }
};

// A constant: participates in forward values only.
template <class T>
Var<T> constant(Tensor<T> v) {
  return std::make_shared<Node<T>>(std::move(v));
}

// A leaf parameter: accumulates gradients across backward calls until zeroed.
template <class T>
Var<T> leaf(Tensor<T> v) {
  auto n = constant(std::move(v));
  n->requires_grad = true;
  return n;
}

// Wrap an op result. `ins` are the op's differentiable inputs; constants may be
// included and are pruned here.
template <class T>
Var<T> make_op(Tensor<T> value, std::initializer_list<Var<T>> ins,
               std::function<void(Node<T>&)> fn) {
  auto n = std::make_shared<Node<T>>(std::move(value));
  if (grad_enabled()) {
    for (const auto& in : ins) {
      if (in->requires_grad) n->inputs.push_back(in);
    }
    if (!n->inputs.empty()) {
      n->requires_grad = true;
      n->backward_fn = std::move(fn);
    }
  }
  return n;
}

// Backpropagate from a scalar root. Iterative post-order topo sort (graph depth
// exceeds safe recursion depth for deep decoders).
template <class T>
void backward(const Var<T>& root) {
  DECSEG_CHECK(root->requires_grad, "backward: root does not require grad");
  DECSEG_CHECK(root->value.numel() == 1,
               "backward: root must be scalar, got " << shape_str(root->value.shape()));

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> done;
  std::vector<std::pair<Node<T>*, size_t>> stack;
  stack.push_back({root.get(), 0});
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (done.count(node)) {
      stack.pop_back();
      continue;
    }
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (!done.count(child)) stack.push_back({child, 0});
    } else {
      done.insert(node);
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad().fill(T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

}  // namespace decseg
