#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pcqa/tensor.hpp"

namespace pcqa {

template <typename T>
struct Node;

/// Handle to a value in the define-by-run graph. Copies share the node.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor<T>& value() const;
  /// Leaf-only mutation (parameter updates, running statistics).
  Tensor<T>& mutable_value();
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }

  bool requires_grad() const;
  void set_requires_grad(bool on);

  /// Gradient buffer; zero-filled on first access.
  Tensor<T>& grad();
  bool has_grad() const;
  void zero_grad();

  const std::shared_ptr<Node<T>>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node<T>>> inputs;
  /// Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node<T>&)> backward;

  Tensor<T>& ensure_grad() {
    if (grad.size() != value.size() || grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

/// Adds g into node's gradient if the node takes part in differentiation.
template <typename T>
void accumulate_grad(Node<T>& node, const Tensor<T>& g);
/// Same, but takes over `g` when the node has no gradient yet.
template <typename T>
void accumulate_grad(Node<T>& node, Tensor<T>&& g);

/// Records a differentiable operation. The output requires grad iff any input
/// does and recording is enabled; otherwise the closure and inputs are dropped.
template <typename T>
Var<T> make_op(std::string op, Tensor<T> value, std::vector<Var<T>> inputs,
               std::function<void(Node<T>&)> backward);

/// Topologically ordered record of the operations reachable from a root.
template <typename T>
class ComputationTape {
 public:
  static ComputationTape record(const Var<T>& root);

  const std::vector<Node<T>*>& nodes() const noexcept { return order_; }
  std::size_t size() const noexcept { return order_.size(); }

 private:
  std::vector<Node<T>*> order_;
};

/// Accumulates dLoss/dLeaf into every reachable leaf that requires grad.
/// Repeated calls accumulate. Throws NotScalar for non-scalar losses.
template <typename T>
void backward(const Var<T>& loss);

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_recording_enabled() noexcept;

extern template class Var<float>;
extern template class Var<double>;

}  // namespace pcqa
