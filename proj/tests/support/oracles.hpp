#pragma once

// Brute-force reference implementations. Deliberately naive and written
// without reusing any library code paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <vector>

#include "pcqa/rng.hpp"
#include "pcqa/tensor.hpp"

namespace oracle {

// rank of x[i] = (#less) + (#equal + 1) / 2, counted pairwise
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) {
      if (v < x[i]) less += 1;
      if (v == x[i]) equal += 1;
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

// textbook single-pass formula, different arithmetic from the library
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  const long double num = n * sxy - sx * sy;
  const long double den = std::sqrt(n * sxx - sx * sx) * std::sqrt(n * syy - sy * sy);
  return static_cast<double>(num / den);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(ranks(x), ranks(y));
}

// tau-b by enumerating every pair
inline double kendall_b(const std::vector<double>& x, const std::vector<double>& y) {
  double conc = 0, disc = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        tx += 1;
      } else if (dy == 0) {
        ty += 1;
      } else if ((dx > 0) == (dy > 0)) {
        conc += 1;
      } else {
        disc += 1;
      }
    }
  }
  return (conc - disc) / std::sqrt((conc + disc + tx) * (conc + disc + ty));
}

inline double rmse(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s / static_cast<double>(x.size()));
}

// Adjacency by walking the ring of views: hop count from a BFS over the cycle
// graph, times the stride.
inline std::vector<std::vector<int>> adjacency(std::size_t n, double rs, double theta) {
  std::vector<std::vector<int>> a(n, std::vector<int>(n, 0));
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<long> hops(n, -1);
    std::deque<std::size_t> q{s};
    hops[s] = 0;
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop_front();
      for (std::size_t v : {(u + 1) % n, (u + n - 1) % n}) {
        if (hops[v] < 0) {
          hops[v] = hops[u] + 1;
          q.push_back(v);
        }
      }
    }
    for (std::size_t t = 0; t < n; ++t) a[s][t] = static_cast<double>(hops[t]) * rs <= theta + 1e-9 ? 1 : 0;
  }
  return a;
}

// D^-1/2 (A v I) D^-1/2 via explicit dense matrix products.
inline std::vector<std::vector<double>> sym_normalize(const std::vector<std::vector<int>>& a) {
  const std::size_t n = a.size();
  using M = std::vector<std::vector<double>>;
  M at(n, std::vector<double>(n)), d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) at[i][j] = (i == j || a[i][j]) ? 1.0 : 0.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0;
    for (std::size_t j = 0; j < n; ++j) deg += at[i][j];
    d[i][i] = 1.0 / std::sqrt(deg);
  }
  auto mul = [n](const M& x, const M& y) {
    M z(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < n; ++j) z[i][j] += x[i][k] * y[k][j];
    return z;
  };
  return mul(mul(d, at), d);
}

}  // namespace oracle

namespace testutil {

template <typename T>
pcqa::Tensor<T> random_tensor(pcqa::Shape shape, pcqa::Rng& rng, double lo = -1.0, double hi = 1.0) {
  pcqa::Tensor<T> t(std::move(shape));
  for (auto& v : t.storage()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

inline std::vector<double> random_vector(std::size_t n, pcqa::Rng& rng, bool with_ties) {
  std::vector<double> v(n);
  for (auto& x : v) x = with_ties ? static_cast<double>(rng.below(4)) : rng.uniform(-5.0, 5.0);
  return v;
}

}  // namespace testutil
