#include "cwm/core/autograd.hpp"

#include <unordered_set>

#include "cwm/core/error.hpp"

namespace cwm {

namespace {
thread_local bool g_grad_enabled = true;
}

Tensor& Node::ensure_grad() {
  if (!has_grad) {
    grad = Tensor(value.shape());
    has_grad = true;
  }
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Var::grad() const {
  if (node_ && node_->has_grad) return node_->grad;
  return Tensor(node_ ? node_->value.shape() : Shape{});
}

void Var::zero_grad() {
  if (node_ && node_->has_grad) node_->grad.fill(0);
}

Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const Var& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(inputs.size());
      for (Var& in : inputs)
        if (in.defined()) node->parents.push_back(in.shared());
      node->backward_fn = std::move(backward);
    }
  }
  return Var(std::move(node));
}

Var constant(Tensor value) { return Var(std::move(value), false); }

Var detach(const Var& x) { return Var(x.value(), false); }

void backward(const Var& root) {
  if (root.numel() != 1) throw_runtime("backward() needs a single-element root, got " + shape_str(root.shape()));
  backward(root, Tensor(root.shape(), real(1)));
}

void backward(const Var& root, const Tensor& seed) {
  if (!root.requires_grad()) return;
  if (!seed.same_shape(root.value())) throw_runtime("backward seed shape mismatch");

  // Iterative post-order DFS to get a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && p->backward_fn && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root.node()->ensure_grad() += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->has_grad && n->backward_fn) n->backward_fn(*n);
  }
  for (Node* n : order) {
    if (!n->backward_fn) continue;
    n->backward_fn = nullptr;
    n->parents.clear();
    n->grad = Tensor();
    n->has_grad = false;
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace cwm
