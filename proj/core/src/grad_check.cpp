#include "pcqa/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "pcqa/error.hpp"

namespace pcqa {

template <typename T>
GradCheckResult grad_check(const ScalarFn<T>& f, const std::vector<Tensor<T>>& inputs, double eps) {
  std::vector<Var<T>> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.emplace_back(t, true);

  const Var<T> out = f(leaves);
  if (out.size() != 1) fail(Errc::NotScalar, "grad_check needs a scalar-valued function");
  backward(out);
  std::vector<Tensor<T>> analytic;
  for (auto& l : leaves) analytic.push_back(l.has_grad() ? l.grad() : Tensor<T>(l.shape()));

  NoGradGuard no_grad;
  GradCheckResult res;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    Tensor<T>& x = leaves[i].mutable_value();
    for (std::size_t j = 0; j < x.size(); ++j) {
      const T orig = x[j];
      x[j] = orig + static_cast<T>(eps);
      const double fp = static_cast<double>(f(leaves).value()[0]);
      x[j] = orig - static_cast<T>(eps);
      const double fm = static_cast<double>(f(leaves).value()[0]);
      x[j] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = static_cast<double>(analytic[i][j]);
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      if (err > res.max_rel_error) res = {err, i, j, a, numeric};
    }
  }
  return res;
}

template GradCheckResult grad_check(const ScalarFn<float>&, const std::vector<Tensor<float>>&, double);
template GradCheckResult grad_check(const ScalarFn<double>&, const std::vector<Tensor<double>>&, double);

}  // namespace pcqa
