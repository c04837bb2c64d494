#include "pcqa/graph_builder.hpp"

#include <algorithm>
#include <cmath>

#include "pcqa/error.hpp"
#include "pcqa/projection.hpp"

namespace pcqa {

AdjacencyNormalization parse_normalization(std::string_view s) {
  if (s == "symmetric") return AdjacencyNormalization::Symmetric;
  if (s == "asymmetric") return AdjacencyNormalization::Asymmetric;
  fail(Errc::InvalidConfig, "unknown normalization '" + std::string(s) + "' (symmetric|asymmetric)");
}

std::string normalization_name(AdjacencyNormalization n) {
  return n == AdjacencyNormalization::Symmetric ? "symmetric" : "asymmetric";
}

double rs_dist(std::size_t i, std::size_t j, double rs_deg, std::size_t n_views) {
  if (i >= n_views || j >= n_views) {
    fail(Errc::IndexOutOfRange, "view index out of range (" + std::to_string(std::max(i, j)) + " >= " +
                                    std::to_string(n_views) + ")");
  }
  const std::size_t d = i > j ? i - j : j - i;
  return static_cast<double>(std::min(d, n_views - d)) * rs_deg;
}

Tensor<double> build_adjacency(std::size_t n_views, double rs_deg, double theta_deg) {
  if (n_views == 0) fail(Errc::InvalidArgument, "adjacency needs at least one view");
  Tensor<double> a({n_views, n_views});
  for (std::size_t i = 0; i < n_views; ++i) {
    for (std::size_t j = 0; j < n_views; ++j) {
      // small slack so e.g. 3 * 24 <= 72 is not lost to rounding
      a[i * n_views + j] = rs_dist(i, j, rs_deg, n_views) <= theta_deg + 1e-9 ? 1.0 : 0.0;
    }
  }
  return a;
}

Tensor<double> normalize_adjacency(const Tensor<double>& a, AdjacencyNormalization mode) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) fail(Errc::ShapeMismatch, "adjacency must be square");
  const std::size_t n = a.dim(0);
  Tensor<double> t = a;
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    t[i * n + i] = 1.0;
    for (std::size_t j = 0; j < n; ++j) deg[i] += t[i * n + j];
  }
  const double right_exp = mode == AdjacencyNormalization::Symmetric ? -0.5 : 0.5;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double& v = t[i * n + j];
      if (v != 0.0) v = v / std::sqrt(deg[i]) * std::pow(deg[j], right_exp);
    }
  }
  return t;
}

template <typename T>
ViewGraph<T> build_graph(Tensor<T> node_features, double rs_deg, double theta_deg, AdjacencyNormalization mode) {
  const std::size_t n = view_count(rs_deg);
  if (node_features.rank() != 2 || node_features.dim(0) != n) {
    fail(Errc::ShapeMismatch, "graph needs " + std::to_string(n) + " node rows for rs=" + std::to_string(rs_deg) +
                                  ", got " + shape_str(node_features.shape()));
  }
  ViewGraph<T> g;
  g.nodes = std::move(node_features);
  g.adjacency_raw = build_adjacency(n, rs_deg, theta_deg);
  g.adjacency_norm = normalize_adjacency(g.adjacency_raw, mode);
  g.rs_deg = rs_deg;
  g.theta_deg = theta_deg;
  return g;
}

template ViewGraph<float> build_graph(Tensor<float>, double, double, AdjacencyNormalization);
template ViewGraph<double> build_graph(Tensor<double>, double, double, AdjacencyNormalization);

}  // namespace pcqa
