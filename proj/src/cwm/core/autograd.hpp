#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "cwm/core/tensor.hpp"

namespace cwm {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One vertex of the reverse-mode tape. Leaves have no backward function.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool has_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;

  /// Zero-filled gradient buffer, allocated on first use.
  Tensor& ensure_grad();
};

/// Handle to a tape node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  /// Direct access for optimizers and parameter loading.
  Tensor& value_mut() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  index_t numel() const { return node_->value.numel(); }
  index_t dim(int i) const { return node_->value.dim(i); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_ && node_->has_grad; }
  /// Accumulated gradient; zeros of the value's shape when none has flowed.
  Tensor grad() const;
  void zero_grad();

  Node* node() const noexcept { return node_.get(); }
  const NodePtr& shared() const noexcept { return node_; }

 private:
  explicit Var(NodePtr node) : node_(std::move(node)) {}
  NodePtr node_;
  friend Var make_op(Tensor, std::vector<Var>, std::function<void(Node&)>);
};

/// Creates the output of a differentiable op. When gradients are disabled or
/// no input requires one, the result is a constant and `backward` is dropped.
Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

Var constant(Tensor value);
/// Same value, cut from the tape.
Var detach(const Var& x);

/// Runs reverse accumulation from a single-element root. Interior nodes are
/// released afterwards; leaf gradients accumulate across calls.
void backward(const Var& root);
void backward(const Var& root, const Tensor& seed);

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace cwm
