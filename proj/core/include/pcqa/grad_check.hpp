#pragma once

#include <functional>
#include <vector>

#include "pcqa/autograd.hpp"

namespace pcqa {

template <typename T>
using ScalarFn = std::function<Var<T>(const std::vector<Var<T>>&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences (f(x+eps) - f(x-eps)) / (2 eps), coordinate by coordinate.
/// The error per coordinate is |a - n| / max(1e-8, |a| + |n|).
template <typename T>
GradCheckResult grad_check(const ScalarFn<T>& f, const std::vector<Tensor<T>>& inputs, double eps = 1e-4);

extern template GradCheckResult grad_check(const ScalarFn<float>&, const std::vector<Tensor<float>>&, double);
extern template GradCheckResult grad_check(const ScalarFn<double>&, const std::vector<Tensor<double>>&, double);

}  // namespace pcqa
