#include "pcqa/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>

#include "pcqa/error.hpp"

namespace pcqa {

namespace {

template <typename T>
Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> row(const T* p, std::size_t n) {
  return {p, static_cast<Eigen::Index>(n)};
}

template <typename T>
Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> row_mut(T* p, std::size_t n) {
  return {p, static_cast<Eigen::Index>(n)};
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// Strides of `src` when read with the index space of `out` (right-aligned,
// zero stride on broadcast axes).
Shape aligned_strides(const Shape& src, const Shape& out) {
  const Shape native = row_major_strides(src);
  Shape s(out.size(), 0);
  const std::size_t pad = out.size() - src.size();
  for (std::size_t i = 0; i < src.size(); ++i) {
    s[pad + i] = src[i] == 1 ? 0 : native[i];
  }
  return s;
}

// Walks the index space of `shape` block by block along the last axis and
// calls f(offsets, inner_length, inner_strides) for each block.
template <std::size_t N, typename F>
void walk(const Shape& shape, const std::array<Shape, N>& strides, F&& f) {
  const std::size_t r = shape.size();
  std::array<std::size_t, N> off{};
  if (r == 0) {
    std::array<std::size_t, N> inner_strides{};
    f(off, std::size_t{1}, inner_strides);
    return;
  }
  const std::size_t total = shape_numel(shape);
  if (total == 0) return;
  const std::size_t inner = shape[r - 1];
  std::array<std::size_t, N> inner_strides{};
  for (std::size_t k = 0; k < N; ++k) inner_strides[k] = strides[k][r - 1];
  std::vector<std::size_t> idx(r, 0);
  const std::size_t blocks = total / inner;
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    f(off, inner, inner_strides);
    for (std::size_t d = r - 1; d-- > 0;) {
      ++idx[d];
      for (std::size_t k = 0; k < N; ++k) off[k] += strides[k][d];
      if (idx[d] < shape[d]) break;
      for (std::size_t k = 0; k < N; ++k) off[k] -= strides[k][d] * shape[d];
      idx[d] = 0;
    }
  }
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
T stable_softplus(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

// ---------------------------------------------------------------------------
// Broadcast kernels

template <typename T>
Tensor<T> sum_to_shape(const Tensor<T>& src, const Shape& target) {
  if (broadcast_shapes(target, src.shape()) != src.shape()) {
    fail(Errc::ShapeMismatch, "cannot sum " + shape_str(src.shape()) + " down to " + shape_str(target));
  }
  Tensor<T> out(target);
  if (target == src.shape()) {
    out.storage() = src.storage();
    return out;
  }
  const Shape dst_strides = aligned_strides(target, src.shape());
  const Shape src_strides = row_major_strides(src.shape());
  const T* s = src.raw();
  T* d = out.raw();
  walk<2>(src.shape(), {src_strides, dst_strides},
          [&](const std::array<std::size_t, 2>& off, std::size_t inner, const std::array<std::size_t, 2>& st) {
            const T* ps = s + off[0];
            T* pd = d + off[1];
            if (st[1] == 0) {
              T acc = T(0);
              for (std::size_t k = 0; k < inner; ++k) acc += ps[k];
              *pd += acc;
            } else {
              for (std::size_t k = 0; k < inner; ++k) pd[k] += ps[k];
            }
          });
  return out;
}

template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& src, const Shape& target) {
  if (broadcast_shapes(src.shape(), target) != target) {
    fail(Errc::ShapeMismatch, "cannot broadcast " + shape_str(src.shape()) + " to " + shape_str(target));
  }
  if (src.shape() == target) return src;
  Tensor<T> out(target);
  const Shape src_strides = aligned_strides(src.shape(), target);
  const Shape dst_strides = row_major_strides(target);
  const T* s = src.raw();
  T* d = out.raw();
  walk<2>(target, {src_strides, dst_strides},
          [&](const std::array<std::size_t, 2>& off, std::size_t inner, const std::array<std::size_t, 2>& st) {
            const T* ps = s + off[0];
            T* pd = d + off[1];
            for (std::size_t k = 0; k < inner; ++k) pd[k] = ps[k * st[0]];
          });
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Var<T> elementwise(const Var<T>& a, const Var<T>& b, BinaryOp op) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const Shape out_shape = broadcast_shapes(av.shape(), bv.shape());
  Tensor<T> out(out_shape);
  const Shape sa = aligned_strides(av.shape(), out_shape);
  const Shape sb = aligned_strides(bv.shape(), out_shape);
  const Shape so = row_major_strides(out_shape);
  const T* pa = av.raw();
  const T* pb = bv.raw();
  T* po = out.raw();
  auto run = [&](auto f) {
    if (av.shape() == out_shape && bv.shape() == out_shape) {
      for (std::size_t i = 0; i < out.size(); ++i) po[i] = f(pa[i], pb[i]);
      return;
    }
    walk<3>(out_shape, {sa, sb, so},
            [&](const std::array<std::size_t, 3>& off, std::size_t inner, const std::array<std::size_t, 3>& st) {
              const T* x = pa + off[0];
              const T* y = pb + off[1];
              T* z = po + off[2];
              for (std::size_t k = 0; k < inner; ++k) z[k] = f(x[k * st[0]], y[k * st[1]]);
            });
  };
  switch (op) {
    case BinaryOp::Add: run([](T x, T y) { return x + y; }); break;
    case BinaryOp::Sub: run([](T x, T y) { return x - y; }); break;
    case BinaryOp::Mul: run([](T x, T y) { return x * y; }); break;
  }

  const char* name = op == BinaryOp::Add ? "add" : op == BinaryOp::Sub ? "sub" : "mul";
  return make_op<T>(name, std::move(out), {a, b}, [op](Node<T>& self) {
    Node<T>& na = *self.inputs[0];
    Node<T>& nb = *self.inputs[1];
    const Tensor<T>& g = self.grad;
    if (op == BinaryOp::Mul) {
      if (na.requires_grad) {
        Tensor<T> prod = broadcast_to(nb.value, g.shape());
        for (std::size_t i = 0; i < prod.size(); ++i) prod[i] *= g[i];
        accumulate_grad(na, sum_to_shape(prod, na.value.shape()));
      }
      if (nb.requires_grad) {
        Tensor<T> prod = broadcast_to(na.value, g.shape());
        for (std::size_t i = 0; i < prod.size(); ++i) prod[i] *= g[i];
        accumulate_grad(nb, sum_to_shape(prod, nb.value.shape()));
      }
      return;
    }
    if (na.requires_grad) accumulate_grad(na, sum_to_shape(g, na.value.shape()));
    if (nb.requires_grad) {
      Tensor<T> gb = sum_to_shape(g, nb.value.shape());
      if (op == BinaryOp::Sub) {
        for (auto& v : gb.storage()) v = -v;
      }
      accumulate_grad(nb, std::move(gb));
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, T factor) {
  Tensor<T> out = x.value();
  for (auto& v : out.storage()) v *= factor;
  return make_op<T>("scale", std::move(out), {x}, [factor](Node<T>& self) {
    Tensor<T> g = self.grad;
    for (auto& v : g.storage()) v *= factor;
    accumulate_grad(*self.inputs[0], std::move(g));
  });
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
Var<T> activation(const Var<T>& x, Activation kind) {
  const Tensor<T>& xv = x.value();
  Tensor<T> out(xv.shape());
  const std::size_t n = xv.size();
  const T* xp = xv.raw();
  T* op = out.raw();
  switch (kind) {
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < n; ++i) op[i] = stable_sigmoid(xp[i]);
      break;
    case Activation::Softplus:
      for (std::size_t i = 0; i < n; ++i) op[i] = stable_softplus(xp[i]);
      break;
    case Activation::Relu:
      for (std::size_t i = 0; i < n; ++i) op[i] = xp[i] > T(0) ? xp[i] : T(0);
      break;
  }
  const char* name = kind == Activation::Sigmoid ? "sigmoid" : kind == Activation::Softplus ? "softplus" : "relu";
  return make_op<T>(name, std::move(out), {x}, [kind](Node<T>& self) {
    Node<T>& in = *self.inputs[0];
    if (!in.requires_grad) return;
    const std::size_t n = self.grad.size();
    const T* g = self.grad.raw();
    const T* x = in.value.raw();
    const T* y = self.value.raw();
    Tensor<T> dx(self.grad.shape());
    T* d = dx.raw();
    switch (kind) {
      case Activation::Sigmoid:
        for (std::size_t i = 0; i < n; ++i) d[i] = g[i] * y[i] * (T(1) - y[i]);
        break;
      case Activation::Softplus:
        for (std::size_t i = 0; i < n; ++i) d[i] = g[i] * stable_sigmoid(x[i]);
        break;
      case Activation::Relu:
        for (std::size_t i = 0; i < n; ++i) d[i] = x[i] > T(0) ? g[i] : T(0);
        break;
    }
    accumulate_grad(in, std::move(dx));
  });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Var<T> reduce(const Var<T>& x, ReduceOp op, std::vector<std::size_t> axes, bool keepdim) {
  const Shape& in_shape = x.shape();
  const std::size_t r = in_shape.size();
  if (axes.empty()) {
    for (std::size_t i = 0; i < r; ++i) axes.push_back(i);
  }
  std::vector<bool> reduced(r, false);
  for (auto a : axes) {
    if (a >= r) fail(Errc::InvalidAxis, "axis " + std::to_string(a) + " out of range for " + shape_str(in_shape));
    if (reduced[a]) fail(Errc::InvalidAxis, "axis " + std::to_string(a) + " listed twice");
    reduced[a] = true;
  }
  Shape kept(in_shape);
  Shape squeezed;
  for (std::size_t i = 0; i < r; ++i) {
    if (reduced[i]) kept[i] = 1;
    else squeezed.push_back(in_shape[i]);
  }
  Tensor<T> out = sum_to_shape(x.value(), kept);
  const std::size_t count = shape_numel(in_shape) / std::max<std::size_t>(1, shape_numel(kept));
  const T factor = op == ReduceOp::Mean ? T(1) / static_cast<T>(count) : T(1);
  if (op == ReduceOp::Mean) {
    for (auto& v : out.storage()) v *= factor;
  }
  out = out.reshaped(keepdim ? kept : squeezed);
  return make_op<T>(op == ReduceOp::Mean ? "mean" : "sum", std::move(out), {x},
                    [kept, factor](Node<T>& self) {
                      Node<T>& in = *self.inputs[0];
                      Tensor<T> g = broadcast_to(self.grad.reshaped(kept), in.value.shape());
                      if (factor != T(1)) {
                        for (auto& v : g.storage()) v *= factor;
                      }
                      accumulate_grad(in, std::move(g));
                    });
}

// ---------------------------------------------------------------------------
// Shape ops

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  return make_op<T>("reshape", std::move(out), {x}, [](Node<T>& self) {
    Node<T>& in = *self.inputs[0];
    accumulate_grad(in, self.grad.reshaped(in.value.shape()));
  });
}

namespace {

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit sp;
  for (std::size_t i = 0; i < axis; ++i) sp.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) sp.inner *= s[i];
  return sp;
}

}  // namespace

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) fail(Errc::ShapeMismatch, "concat of zero tensors");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) fail(Errc::InvalidAxis, "concat axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) fail(Errc::ShapeMismatch, "concat rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        fail(Errc::ShapeMismatch, "concat of " + shape_str(first) + " and " + shape_str(s));
      }
    }
    out_shape[axis] += s[axis];
    widths.push_back(s[axis]);
  }
  const AxisSplit sp = split_at(out_shape, axis);
  Tensor<T> out(out_shape);
  const std::size_t out_row = out_shape[axis] * sp.inner;
  std::size_t col = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const std::size_t w = widths[p] * sp.inner;
    const T* src = parts[p].value().raw();
    for (std::size_t o = 0; o < sp.outer; ++o) std::copy_n(src + o * w, w, out.raw() + o * out_row + col);
    col += w;
  }
  return make_op<T>("concat", std::move(out), parts, [widths, sp, out_row](Node<T>& self) {
    std::size_t c = 0;
    for (std::size_t p = 0; p < self.inputs.size(); ++p) {
      Node<T>& in = *self.inputs[p];
      const std::size_t w = widths[p] * sp.inner;
      if (in.requires_grad) {
        Tensor<T> g(in.value.shape());
        for (std::size_t o = 0; o < sp.outer; ++o) std::copy_n(self.grad.raw() + o * out_row + c, w, g.raw() + o * w);
        accumulate_grad(in, std::move(g));
      }
      c += w;
    }
  });
}

template <typename T>
Var<T> slice(const Var<T>& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = x.shape();
  if (axis >= s.size()) fail(Errc::InvalidAxis, "slice axis out of range");
  if (begin > end || end > s[axis]) fail(Errc::IndexOutOfRange, "slice bounds out of range");
  Shape out_shape = s;
  out_shape[axis] = end - begin;
  const AxisSplit sp = split_at(s, axis);
  const std::size_t in_row = s[axis] * sp.inner;
  const std::size_t w = (end - begin) * sp.inner;
  const std::size_t start = begin * sp.inner;
  Tensor<T> out(out_shape);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(x.value().raw() + o * in_row + start, w, out.raw() + o * w);
  }
  return make_op<T>("slice", std::move(out), {x}, [sp, in_row, w, start](Node<T>& self) {
    Node<T>& in = *self.inputs[0];
    Tensor<T> g(in.value.shape());
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(self.grad.raw() + o * w, w, g.raw() + o * in_row + start);
    }
    accumulate_grad(in, std::move(g));
  });
}

// ---------------------------------------------------------------------------
// Matrix product

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() < 2 || as.size() > 3 || bs.size() < 2 || bs.size() > 3) {
    fail(Errc::ShapeMismatch, "matmul needs rank-2 or rank-3 operands, got " + shape_str(as) + " and " + shape_str(bs));
  }
  const std::size_t m = as[as.size() - 2];
  const std::size_t k = as[as.size() - 1];
  const std::size_t kb = bs[bs.size() - 2];
  const std::size_t n = bs[bs.size() - 1];
  if (k != kb) fail(Errc::ShapeMismatch, "matmul inner dimensions differ: " + shape_str(as) + " * " + shape_str(bs));
  const std::size_t ga = as.size() == 3 ? as[0] : 1;
  const std::size_t gb = bs.size() == 3 ? bs[0] : 1;
  const bool a_batched = as.size() == 3;
  const bool b_batched = bs.size() == 3;
  if (a_batched && b_batched && ga != gb) fail(Errc::ShapeMismatch, "matmul batch sizes differ");
  const std::size_t g = std::max(ga, gb);

  Shape out_shape = (a_batched || b_batched) ? Shape{g, m, n} : Shape{m, n};
  Tensor<T> out(out_shape);
  const T* pa = a.value().raw();
  const T* pb = b.value().raw();
  if (a_batched && !b_batched) {
    // Shared right operand: one (g*m x k) * (k x n) product.
    MatMap<T>(out.raw(), g * m, n).noalias() = ConstMatMap<T>(pa, g * m, k) * ConstMatMap<T>(pb, k, n);
  } else {
    for (std::size_t i = 0; i < g; ++i) {
      const T* ai = pa + (a_batched ? i * m * k : 0);
      const T* bi = pb + (b_batched ? i * k * n : 0);
      MatMap<T>(out.raw() + i * m * n, m, n).noalias() = ConstMatMap<T>(ai, m, k) * ConstMatMap<T>(bi, k, n);
    }
  }

  return make_op<T>("matmul", std::move(out), {a, b}, [=](Node<T>& self) {
    Node<T>& na = *self.inputs[0];
    Node<T>& nb = *self.inputs[1];
    const T* gptr = self.grad.raw();
    const T* av = na.value.raw();
    const T* bv = nb.value.raw();
    if (a_batched && !b_batched) {
      ConstMatMap<T> G(gptr, g * m, n);
      if (na.requires_grad) {
        Tensor<T> da(na.value.shape());
        MatMap<T>(da.raw(), g * m, k).noalias() = G * ConstMatMap<T>(bv, k, n).transpose();
        accumulate_grad(na, std::move(da));
      }
      if (nb.requires_grad) {
        Tensor<T> db(nb.value.shape());
        MatMap<T>(db.raw(), k, n).noalias() = ConstMatMap<T>(av, g * m, k).transpose() * G;
        accumulate_grad(nb, std::move(db));
      }
      return;
    }
    Tensor<T> da, db;
    if (na.requires_grad) da = Tensor<T>(na.value.shape());
    if (nb.requires_grad) db = Tensor<T>(nb.value.shape());
    for (std::size_t i = 0; i < g; ++i) {
      ConstMatMap<T> G(gptr + i * m * n, m, n);
      const std::size_t aoff = a_batched ? i * m * k : 0;
      const std::size_t boff = b_batched ? i * k * n : 0;
      if (na.requires_grad) {
        MatMap<T>(da.raw() + aoff, m, k).noalias() += G * ConstMatMap<T>(bv + boff, k, n).transpose();
      }
      if (nb.requires_grad) {
        MatMap<T>(db.raw() + boff, k, n).noalias() += ConstMatMap<T>(av + aoff, m, k).transpose() * G;
      }
    }
    if (na.requires_grad) accumulate_grad(na, std::move(da));
    if (nb.requires_grad) accumulate_grad(nb, std::move(db));
  });
}

// ---------------------------------------------------------------------------
// Convolution

namespace {

struct ConvGeom {
  std::size_t batch, channels, height, width;
  std::size_t out_channels, kh, kw, stride, pad;
  std::size_t out_h, out_w;

  std::size_t col_rows() const { return channels * kh * kw; }
  std::size_t col_cols() const { return out_h * out_w; }
  bool is_pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// [lo, hi) of output columns with 0 <= ox * stride + kj - pad < width.
std::pair<std::size_t, std::size_t> valid_columns(const ConvGeom& g, std::size_t kj) {
  std::size_t lo = 0;
  while (lo < g.out_w && lo * g.stride + kj < g.pad) ++lo;
  std::size_t hi = g.out_w;
  while (hi > lo && (hi - 1) * g.stride + kj >= g.pad + g.width) --hi;
  return {lo, hi};
}

template <typename T>
void im2col(const T* x, const ConvGeom& g, T* col) {
  const std::size_t cols = g.col_cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* xc = x + c * g.height * g.width;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = col + ((c * g.kh + ki) * g.kw + kj) * cols;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<long>(g.height)) {
            std::fill_n(dst, g.out_w, T(0));
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(iy) * g.width;
          // ox range whose input column lands inside the image
          const auto [lo, hi] = valid_columns(g, kj);
          std::fill_n(dst, lo, T(0));
          if (hi <= lo) {
          } else if (g.stride == 1) {
            std::copy_n(src + (lo + kj - g.pad), hi - lo, dst + lo);
          } else {
            const T* s0 = src + (lo * g.stride + kj - g.pad);
            for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] = s0[(ox - lo) * g.stride];
          }
          std::fill_n(dst + hi, g.out_w - hi, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeom& g, T* dx) {
  const std::size_t cols = g.col_cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* xc = dx + c * g.height * g.width;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = col + ((c * g.kh + ki) * g.kw + kj) * cols;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
          T* dst = xc + static_cast<std::size_t>(iy) * g.width;
          const T* src = row + oy * g.out_w;
          const auto [lo, hi] = valid_columns(g, kj);
          if (hi <= lo) continue;
          T* d0 = dst + (lo * g.stride + kj - g.pad);
          for (std::size_t ox = lo; ox < hi; ++ox) d0[(ox - lo) * g.stride] += src[ox];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, Conv2dOptions opt) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 4) {
    fail(Errc::ShapeMismatch, "conv2d expects x [B,C,H,W] and w [O,C,kh,kw], got " + shape_str(xs) + ", " + shape_str(ws));
  }
  if (xs[1] != ws[1]) fail(Errc::ShapeMismatch, "conv2d channel mismatch: " + shape_str(xs) + " vs " + shape_str(ws));
  if (opt.stride == 0) fail(Errc::InvalidArgument, "conv2d stride must be positive");
  if (xs[2] + 2 * opt.padding < ws[2] || xs[3] + 2 * opt.padding < ws[3]) {
    fail(Errc::ShapeMismatch, "conv2d kernel larger than padded input");
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.shape().size() != 1 || bias.shape()[0] != ws[0])) {
    fail(Errc::ShapeMismatch, "conv2d bias must have shape [O]");
  }
  ConvGeom g{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], ws[3], opt.stride, opt.padding, 0, 0};
  g.out_h = (g.height + 2 * g.pad - g.kh) / g.stride + 1;
  g.out_w = (g.width + 2 * g.pad - g.kw) / g.stride + 1;

  Tensor<T> out({g.batch, g.out_channels, g.out_h, g.out_w});
  const std::size_t rows = g.col_rows();
  const std::size_t cols = g.col_cols();
  AlignedVector<T> col(g.is_pointwise() ? 0 : rows * cols);
  ConstMatMap<T> W(w.value().raw(), g.out_channels, rows);
  const std::size_t in_plane = g.channels * g.height * g.width;
  const std::size_t out_plane = g.out_channels * cols;
  for (std::size_t b = 0; b < g.batch; ++b) {
    const T* xb = x.value().raw() + b * in_plane;
    const T* cb = xb;
    if (!g.is_pointwise()) {
      im2col(xb, g, col.data());
      cb = col.data();
    }
    MatMap<T> Y(out.raw() + b * out_plane, g.out_channels, cols);
    Y.noalias() = W * ConstMatMap<T>(cb, rows, cols);
    if (has_bias) {
      const T* bv = bias.value().raw();
      for (std::size_t o = 0; o < g.out_channels; ++o) Y.row(static_cast<Eigen::Index>(o)).array() += bv[o];
    }
  }

  std::vector<Var<T>> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return make_op<T>("conv2d", std::move(out), std::move(inputs), [g, has_bias](Node<T>& self) {
    Node<T>& nx = *self.inputs[0];
    Node<T>& nw = *self.inputs[1];
    const std::size_t rows = g.col_rows();
    const std::size_t cols = g.col_cols();
    const std::size_t in_plane = g.channels * g.height * g.width;
    const std::size_t out_plane = g.out_channels * cols;
    ConstMatMap<T> W(nw.value.raw(), g.out_channels, rows);
    Tensor<T> dw, dx;
    if (nw.requires_grad) dw = Tensor<T>(nw.value.shape());
    if (nx.requires_grad) dx = Tensor<T>(nx.value.shape());
    AlignedVector<T> col(g.is_pointwise() ? 0 : rows * cols);
    AlignedVector<T> dcol(g.is_pointwise() ? 0 : rows * cols);
    for (std::size_t b = 0; b < g.batch; ++b) {
      ConstMatMap<T> G(self.grad.raw() + b * out_plane, g.out_channels, cols);
      const T* xb = nx.value.raw() + b * in_plane;
      if (nw.requires_grad) {
        const T* cb = xb;
        if (!g.is_pointwise()) {
          im2col(xb, g, col.data());
          cb = col.data();
        }
        MatMap<T>(dw.raw(), g.out_channels, rows).noalias() += G * ConstMatMap<T>(cb, rows, cols).transpose();
      }
      if (nx.requires_grad) {
        if (g.is_pointwise()) {
          MatMap<T>(dx.raw() + b * in_plane, rows, cols).noalias() = W.transpose() * G;
        } else {
          MatMap<T>(dcol.data(), rows, cols).noalias() = W.transpose() * G;
          col2im_add(dcol.data(), g, dx.raw() + b * in_plane);
        }
      }
    }
    if (nw.requires_grad) accumulate_grad(nw, std::move(dw));
    if (nx.requires_grad) accumulate_grad(nx, std::move(dx));
    if (has_bias && self.inputs[2]->requires_grad) {
      Node<T>& nb = *self.inputs[2];
      Tensor<T> db(nb.value.shape());
      for (std::size_t b = 0; b < g.batch; ++b) {
        const T* gb = self.grad.raw() + b * out_plane;
        for (std::size_t o = 0; o < g.out_channels; ++o) {
          T acc = T(0);
          for (std::size_t i = 0; i < cols; ++i) acc += gb[o * cols + i];
          db[o] += acc;
        }
      }
      accumulate_grad(nb, std::move(db));
    }
  });
}

// ---------------------------------------------------------------------------
// Batch normalization

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, Tensor<T>& running_mean,
                  Tensor<T>& running_var, BnMode mode, BatchNormOptions opt) {
  const Shape& xs = x.shape();
  if (xs.size() < 2) fail(Errc::ShapeMismatch, "batch_norm expects [B, C, ...], got " + shape_str(xs));
  const std::size_t batch = xs[0];
  const std::size_t channels = xs[1];
  std::size_t spatial = 1;
  for (std::size_t i = 2; i < xs.size(); ++i) spatial *= xs[i];
  const Shape cshape{channels};
  if (gamma.shape() != cshape || beta.shape() != cshape || running_mean.shape() != cshape ||
      running_var.shape() != cshape) {
    fail(Errc::ShapeMismatch, "batch_norm parameters must have shape " + shape_str(cshape));
  }
  const std::size_t m = batch * spatial;
  if (mode == BnMode::Train && m == 0) fail(Errc::InvalidArgument, "batch_norm in train mode needs elements");

  const T* xv = x.value().raw();
  const T* gv = gamma.value().raw();
  const T* bv = beta.value().raw();
  Tensor<T> xhat(xs);
  Tensor<T> out(xs);
  std::vector<T> invstd(channels);
  const T eps = static_cast<T>(opt.eps);
  const T mom = static_cast<T>(opt.momentum);

  for (std::size_t c = 0; c < channels; ++c) {
    T mu, var;
    if (mode == BnMode::Train) {
      // vectorized per-row sums, rows combined in double
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b) s += static_cast<double>(row(xv + (b * channels + c) * spatial, spatial).sum());
      const double md = s / static_cast<double>(m);
      double ss = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        ss += static_cast<double>((row(xv + (b * channels + c) * spatial, spatial) - static_cast<T>(md)).square().sum());
      }
      const double vd = ss / static_cast<double>(m);
      mu = static_cast<T>(md);
      var = static_cast<T>(vd);
      const double unbiased = m > 1 ? vd * static_cast<double>(m) / static_cast<double>(m - 1) : vd;
      running_mean[c] = (T(1) - mom) * running_mean[c] + mom * mu;
      running_var[c] = (T(1) - mom) * running_var[c] + mom * static_cast<T>(unbiased);
    } else {
      mu = running_mean[c];
      var = running_var[c];
    }
    invstd[c] = T(1) / std::sqrt(var + eps);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + c) * spatial;
      auto h = row_mut(xhat.raw() + off, spatial);
      h = (row(xv + off, spatial) - mu) * invstd[c];
      row_mut(out.raw() + off, spatial) = h * gv[c] + bv[c];
    }
  }

  return make_op<T>(mode == BnMode::Train ? "batch_norm_train" : "batch_norm_eval", std::move(out), {x, gamma, beta},
                    [xhat = std::move(xhat), invstd = std::move(invstd), mode, batch, channels, spatial,
                     m](Node<T>& self) {
                      Node<T>& nx = *self.inputs[0];
                      Node<T>& ng = *self.inputs[1];
                      Node<T>& nbeta = *self.inputs[2];
                      const T* g = self.grad.raw();
                      const T* gam = ng.value.raw();
                      Tensor<T> dg(ng.value.shape());
                      Tensor<T> db(nbeta.value.shape());
                      Tensor<T> dx;
                      if (nx.requires_grad) dx = Tensor<T>(nx.value.shape());
                      for (std::size_t c = 0; c < channels; ++c) {
                        double acc_g = 0.0, acc_gh = 0.0;
                        for (std::size_t b = 0; b < batch; ++b) {
                          const std::size_t off = (b * channels + c) * spatial;
                          acc_g += static_cast<double>(row(g + off, spatial).sum());
                          acc_gh += static_cast<double>((row(g + off, spatial) * row(xhat.raw() + off, spatial)).sum());
                        }
                        const T sum_g = static_cast<T>(acc_g), sum_gh = static_cast<T>(acc_gh);
                        dg[c] = sum_gh;
                        db[c] = sum_g;
                        if (!nx.requires_grad) continue;
                        const T k = gam[c] * invstd[c];
                        const T inv_m = T(1) / static_cast<T>(m);
                        for (std::size_t b = 0; b < batch; ++b) {
                          const std::size_t off = (b * channels + c) * spatial;
                          auto d = row_mut(dx.raw() + off, spatial);
                          if (mode == BnMode::Train) {
                            d = k * (row(g + off, spatial) - inv_m * sum_g - row(xhat.raw() + off, spatial) * (inv_m * sum_gh));
                          } else {
                            d = k * row(g + off, spatial);
                          }
                        }
                      }
                      if (nx.requires_grad) accumulate_grad(nx, std::move(dx));
                      accumulate_grad(ng, std::move(dg));
                      accumulate_grad(nbeta, std::move(db));
                    });
}

#define PCQA_INSTANTIATE_OPS(T)                                                                        \
  template Tensor<T> sum_to_shape(const Tensor<T>&, const Shape&);                                    \
  template Tensor<T> broadcast_to(const Tensor<T>&, const Shape&);                                    \
  template Var<T> elementwise(const Var<T>&, const Var<T>&, BinaryOp);                                \
  template Var<T> scale(const Var<T>&, T);                                                            \
  template Var<T> activation(const Var<T>&, Activation);                                              \
  template Var<T> reduce(const Var<T>&, ReduceOp, std::vector<std::size_t>, bool);                    \
  template Var<T> reshape(const Var<T>&, Shape);                                                      \
  template Var<T> concat(const std::vector<Var<T>>&, std::size_t);                                    \
  template Var<T> slice(const Var<T>&, std::size_t, std::size_t, std::size_t);                        \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                               \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, Conv2dOptions);                 \
  template Var<T> batch_norm(const Var<T>&, const Var<T>&, const Var<T>&, Tensor<T>&, Tensor<T>&, BnMode, \
                             BatchNormOptions);

PCQA_INSTANTIATE_OPS(float)
PCQA_INSTANTIATE_OPS(double)

}  // namespace pcqa
