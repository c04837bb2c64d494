#pragma once

#include <cstddef>
#include <vector>

#include "pcqa/autograd.hpp"

namespace pcqa {

/// Non-differentiable input, e.g. a fixed adjacency matrix.
template <typename T>
Var<T> constant(Tensor<T> value) {
  return Var<T>(std::move(value), false);
}

/// (m x k) * (k x n). Either side may carry a leading batch axis; a rank-2
/// operand is shared across the batch.
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Cross-correlation of x [B, C, H, W] with w [O, C, kh, kw]; bias [O] is
/// optional (pass an undefined Var to skip it).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, Conv2dOptions opt = {});

enum class BnMode { Train, Eval };

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.1;
};

/// Per-channel normalization of x [B, C, ...] over every axis except 1.
/// Train mode normalizes with batch statistics and updates the running
/// estimates (unbiased variance); eval mode uses the running estimates.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, Tensor<T>& running_mean,
                  Tensor<T>& running_var, BnMode mode, BatchNormOptions opt = {});

enum class Activation { Sigmoid, Softplus, Relu };

template <typename T>
Var<T> activation(const Var<T>& x, Activation kind);

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return activation(x, Activation::Sigmoid);
}
template <typename T>
Var<T> softplus(const Var<T>& x) {
  return activation(x, Activation::Softplus);
}
template <typename T>
Var<T> relu(const Var<T>& x) {
  return activation(x, Activation::Relu);
}

enum class ReduceOp { Mean, Sum };

/// Reduces over `axes` (all axes when empty). Throws InvalidAxis.
template <typename T>
Var<T> reduce(const Var<T>& x, ReduceOp op, std::vector<std::size_t> axes = {}, bool keepdim = false);

template <typename T>
Var<T> mean(const Var<T>& x, std::vector<std::size_t> axes = {}, bool keepdim = false) {
  return reduce(x, ReduceOp::Mean, std::move(axes), keepdim);
}
template <typename T>
Var<T> sum(const Var<T>& x, std::vector<std::size_t> axes = {}, bool keepdim = false) {
  return reduce(x, ReduceOp::Sum, std::move(axes), keepdim);
}

enum class BinaryOp { Add, Sub, Mul };

/// Broadcasting elementwise arithmetic; gradients are summed back over
/// broadcast axes.
template <typename T>
Var<T> elementwise(const Var<T>& a, const Var<T>& b, BinaryOp op);

template <typename T>
Var<T> operator+(const Var<T>& a, const Var<T>& b) {
  return elementwise(a, b, BinaryOp::Add);
}
template <typename T>
Var<T> operator-(const Var<T>& a, const Var<T>& b) {
  return elementwise(a, b, BinaryOp::Sub);
}
template <typename T>
Var<T> operator*(const Var<T>& a, const Var<T>& b) {
  return elementwise(a, b, BinaryOp::Mul);
}

template <typename T>
Var<T> scale(const Var<T>& x, T factor);

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis);

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape);

/// Elements [begin, end) along `axis`.
template <typename T>
Var<T> slice(const Var<T>& x, std::size_t axis, std::size_t begin, std::size_t end);

// Tensor-level kernels shared with tests and non-differentiable code.

/// Sums `src` down to `target`, which must broadcast to src's shape.
template <typename T>
Tensor<T> sum_to_shape(const Tensor<T>& src, const Shape& target);

template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& src, const Shape& target);

}  // namespace pcqa
