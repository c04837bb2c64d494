#pragma once

#include <cmath>
#include <string>

#include "pcqa/ops.hpp"
#include "pcqa/param_store.hpp"
#include "pcqa/rng.hpp"

namespace pcqa {

template <typename T>
Tensor<T> normal_init(Shape shape, double stddev, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.storage()) v = static_cast<T>(rng.normal(0.0, stddev));
  return t;
}

template <typename T>
Tensor<T> uniform_init(Shape shape, double limit, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.storage()) v = static_cast<T>(rng.uniform(-limit, limit));
  return t;
}

/// Conv with He-normal weights and zero bias.
template <typename T>
struct Conv2dLayer {
  Var<T> weight;
  Var<T> bias;
  Conv2dOptions options;

  Conv2dLayer() = default;
  Conv2dLayer(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
              std::size_t kernel, Conv2dOptions opt, Rng& rng)
      : options(opt) {
    const double fan_in = static_cast<double>(in * kernel * kernel);
    weight = store.add_parameter(name + ".weight", normal_init<T>({out, in, kernel, kernel}, std::sqrt(2.0 / fan_in), rng));
    bias = store.add_parameter(name + ".bias", Tensor<T>({out}));
  }

  Var<T> operator()(const Var<T>& x) const { return conv2d(x, weight, bias, options); }
};

template <typename T>
struct BatchNormLayer {
  Var<T> gamma;
  Var<T> beta;
  Var<T> running_mean;
  Var<T> running_var;
  BatchNormOptions options;

  BatchNormLayer() = default;
  BatchNormLayer(ParameterStore<T>& store, const std::string& name, std::size_t channels) {
    gamma = store.add_parameter(name + ".gamma", Tensor<T>::ones({channels}));
    beta = store.add_parameter(name + ".beta", Tensor<T>({channels}));
    running_mean = store.add_buffer(name + ".running_mean", Tensor<T>({channels}));
    running_var = store.add_buffer(name + ".running_var", Tensor<T>::ones({channels}));
  }

  Var<T> operator()(const Var<T>& x, BnMode mode) {
    return batch_norm(x, gamma, beta, running_mean.mutable_value(), running_var.mutable_value(), mode, options);
  }
};

/// y = x W + b with W [in, out]; Xavier-uniform weights.
template <typename T>
struct LinearLayer {
  Var<T> weight;
  Var<T> bias;

  LinearLayer() = default;
  LinearLayer(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    weight = store.add_parameter(name + ".weight", uniform_init<T>({in, out}, limit, rng));
    bias = store.add_parameter(name + ".bias", Tensor<T>({out}));
  }

  Var<T> operator()(const Var<T>& x) const { return matmul(x, weight) + bias; }
};

}  // namespace pcqa
