#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "ledcnet/core/tensor.hpp"

namespace ledcnet {

namespace detail {
inline thread_local bool grad_enabled = true;
inline std::atomic<uint64_t> node_seq{0};
}  // namespace detail

inline bool grad_mode() { return detail::grad_enabled; }

/// Disables tape recording for the enclosing scope (inference / profiling).
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_enabled) { detail::grad_enabled = false; }
  ~NoGradGuard() { detail::grad_enabled = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// One node of the reverse-mode tape. Results hold their parents alive via
/// shared_ptr; backward functions receive the node itself and accumulate
/// into the parents' grads.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated on first accumulation
  bool requires_grad = false;
  uint64_t seq = 0;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backward_fn;

  Tensor<T>& ensure_grad() {
    if (grad.empty() && value.numel() > 0) grad = Tensor<T>(value.shape());
    return grad;
  }
  void zero_grad() {
    if (!grad.empty()) grad.fill(T(0));
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> make_leaf(Tensor<T> value, bool requires_grad = false) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad && detail::grad_enabled;
  n->seq = detail::node_seq.fetch_add(1);
  return n;
}

/// Parameter leaf: keeps requires_grad across NoGrad scopes so a model built
/// anywhere still trains.
template <typename T>
Var<T> make_param(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->seq = detail::node_seq.fetch_add(1);
  return n;
}

/// Op result. When grad mode is off, or no parent requires grad, the result
/// is a detached constant and the tape stays empty.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents,
                   std::function<void(Node<T>&)> backward_fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->seq = detail::node_seq.fetch_add(1);
  bool need = false;
  if (detail::grad_enabled)
    for (const auto& p : parents)
      if (p && p->requires_grad) need = true;
  if (need) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

/// Reverse sweep from a scalar root. Nodes were created in topological order,
/// so visiting reachable nodes by decreasing sequence number is a valid
/// reverse-topological schedule.
template <typename T>
void backward(const Var<T>& root) {
  if (!root) throw Error("backward: null root");
  if (root->value.numel() != 1)
    throw ShapeError("backward: root must be a scalar, got " + shape_str(root->value.shape()));
  if (!root->requires_grad) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents)
      if (p && p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->seq > b->seq; });

  root->ensure_grad().fill(T(1));
  for (Node<T>* n : order) {
    if (!n->backward_fn) continue;
    if (n->grad.empty()) continue;  // no gradient ever reached this node
    n->backward_fn(*n);
  }
}

/// Frees the recorded graph hanging off a root without touching values.
template <typename T>
void release_graph(const Var<T>& root) {
  if (!root) return;
  root->parents.clear();
  root->backward_fn = nullptr;
}

}  // namespace ledcnet
