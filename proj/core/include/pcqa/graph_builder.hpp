#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "pcqa/tensor.hpp"

namespace pcqa {

enum class AdjacencyNormalization {
  Symmetric,     // D^-1/2 (A+I) D^-1/2
  Asymmetric,  // D^-1/2 (A+I) D^+1/2, kept for comparison only
};

AdjacencyNormalization parse_normalization(std::string_view s);
std::string normalization_name(AdjacencyNormalization n);

/// Circular angular distance between views i and j of one direction group.
double rs_dist(std::size_t i, std::size_t j, double rs_deg, std::size_t n_views);

/// Binary N x N matrix, 1 where rs_dist <= theta. Self-pairs are always 1.
Tensor<double> build_adjacency(std::size_t n_views, double rs_deg, double theta_deg);

/// Adds self-loops (saturating at 1) and degree-normalizes.
Tensor<double> normalize_adjacency(const Tensor<double>& a,
                                   AdjacencyNormalization mode = AdjacencyNormalization::Symmetric);

template <typename T>
struct ViewGraph {
  Tensor<T> nodes;                // [N, D]
  Tensor<double> adjacency_raw;   // [N, N]
  Tensor<double> adjacency_norm;  // [N, N]
  double rs_deg = 36.0;
  double theta_deg = 36.0;
};

template <typename T>
ViewGraph<T> build_graph(Tensor<T> node_features, double rs_deg, double theta_deg,
                         AdjacencyNormalization mode = AdjacencyNormalization::Symmetric);

/// Â converted to the model's scalar type.
template <typename T>
Tensor<T> cast_tensor(const Tensor<double>& t) {
  Tensor<T> out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<T>(t[i]);
  return out;
}

}  // namespace pcqa
