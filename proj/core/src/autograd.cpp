#include "pcqa/autograd.hpp"

#include <algorithm>
#include <unordered_set>

#include "pcqa/error.hpp"

namespace pcqa {

namespace {
thread_local bool g_recording = true;
}

bool grad_recording_enabled() noexcept { return g_recording; }

NoGradGuard::NoGradGuard() : previous_(g_recording) { g_recording = false; }
NoGradGuard::~NoGradGuard() { g_recording = previous_; }

template <typename T>
Var<T>::Var(Tensor<T> value, bool requires_grad) : node_(std::make_shared<Node<T>>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

template <typename T>
const Tensor<T>& Var<T>::value() const {
  if (!node_) fail(Errc::InvalidArgument, "use of an undefined Var");
  return node_->value;
}

template <typename T>
Tensor<T>& Var<T>::mutable_value() {
  if (!node_) fail(Errc::InvalidArgument, "use of an undefined Var");
  return node_->value;
}

template <typename T>
bool Var<T>::requires_grad() const {
  return node_ && node_->requires_grad;
}

template <typename T>
void Var<T>::set_requires_grad(bool on) {
  if (!node_) fail(Errc::InvalidArgument, "use of an undefined Var");
  node_->requires_grad = on;
}

template <typename T>
Tensor<T>& Var<T>::grad() {
  if (!node_) fail(Errc::InvalidArgument, "use of an undefined Var");
  return node_->ensure_grad();
}

template <typename T>
bool Var<T>::has_grad() const {
  return node_ && node_->grad.size() == node_->value.size() && !node_->grad.empty();
}

template <typename T>
void Var<T>::zero_grad() {
  if (node_ && !node_->grad.empty()) node_->grad.fill(T(0));
}

template <typename T>
void accumulate_grad(Node<T>& node, const Tensor<T>& g) {
  if (!node.requires_grad) return;
  if (g.size() != node.value.size()) {
    fail(Errc::ShapeMismatch, "gradient " + shape_str(g.shape()) + " for value " + shape_str(node.value.shape()));
  }
  auto& dst = node.ensure_grad();
  T* d = dst.raw();
  const T* s = g.raw();
  const std::size_t n = g.size();
  for (std::size_t i = 0; i < n; ++i) d[i] += s[i];
}

template <typename T>
void accumulate_grad(Node<T>& node, Tensor<T>&& g) {
  if (!node.requires_grad) return;
  if (node.grad.shape() != node.value.shape() && g.shape() == node.value.shape()) {
    node.grad = std::move(g);
    return;
  }
  accumulate_grad(node, static_cast<const Tensor<T>&>(g));
}

template <typename T>
Var<T> make_op(std::string op, Tensor<T> value, std::vector<Var<T>> inputs,
               std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->op = std::move(op);
  node->is_leaf = false;
  const bool needs = g_recording && std::any_of(inputs.begin(), inputs.end(),
                                                [](const Var<T>& v) { return v.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(backward_fn);
  }
  return Var<T>(std::move(node));
}

template <typename T>
ComputationTape<T> ComputationTape<T>::record(const Var<T>& root) {
  ComputationTape tape;
  if (!root.defined() || !root.requires_grad()) return tape;
  // Iterative post-order DFS: a node is emitted after all of its inputs.
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      tape.order_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

template <typename T>
void backward(const Var<T>& loss) {
  if (!loss.defined()) fail(Errc::InvalidArgument, "backward on an undefined Var");
  if (loss.size() != 1) {
    fail(Errc::NotScalar, "backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  const auto tape = ComputationTape<T>::record(loss);
  // Interior gradients are per-call; leaf gradients accumulate across calls.
  // Interior buffers start unallocated so the first contribution can be moved in.
  for (Node<T>* n : tape.nodes()) {
    if (!n->is_leaf) n->grad = Tensor<T>();
  }
  Node<T>* root = loss.node().get();
  root->ensure_grad()[0] += T(1);
  const auto& order = tape.nodes();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (!n->is_leaf) n->ensure_grad();
    if (n->backward) n->backward(*n);
    // Release interior gradients once propagated.
    if (!n->is_leaf && n != root) n->grad = Tensor<T>();
  }
}

template class Var<float>;
template class Var<double>;
template class ComputationTape<float>;
template class ComputationTape<double>;
template void accumulate_grad(Node<float>&, const Tensor<float>&);
template void accumulate_grad(Node<double>&, const Tensor<double>&);
template void accumulate_grad(Node<float>&, Tensor<float>&&);
template void accumulate_grad(Node<double>&, Tensor<double>&&);
template Var<float> make_op(std::string, Tensor<float>, std::vector<Var<float>>,
                            std::function<void(Node<float>&)>);
template Var<double> make_op(std::string, Tensor<double>, std::vector<Var<double>>,
                             std::function<void(Node<double>&)>);
template void backward(const Var<float>&);
template void backward(const Var<double>&);

}  // namespace pcqa
