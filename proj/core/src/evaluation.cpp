#include "pcqa/evaluation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <json.hpp>
#include <numeric>

#include "pcqa/error.hpp"

namespace pcqa {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y, std::size_t min_n, const char* what) {
  if (x.size() != y.size()) {
    fail(Errc::LengthMismatch, std::string(what) + ": lengths differ (" + std::to_string(x.size()) + " vs " +
                                   std::to_string(y.size()) + ")");
  }
  if (x.size() < min_n) fail(Errc::DegenerateInput, std::string(what) + " needs at least " + std::to_string(min_n) + " samples");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) fail(Errc::DegenerateInput, std::string(what) + ": non-finite input");
  }
}

double pearson(std::span<const double> x, std::span<const double> y, const char* what) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) fail(Errc::DegenerateInput, std::string(what) + " is undefined for constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Number of inversions in v, sorting it in the process.
std::uint64_t merge_count(std::vector<double>& v, std::vector<double>& tmp, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = merge_count(v, tmp, lo, mid) + merge_count(v, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + lo, tmp.begin() + hi, v.begin() + lo);
  return swaps;
}

template <typename Eq>
std::uint64_t tied_pairs(std::size_t n, Eq same) {
  std::uint64_t total = 0, run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && same(i - 1, i)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

double srcc(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 2, "srcc");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry, "srcc");
}

double krcc(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 2, "krcc");
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });
  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t tie_x = tied_pairs(n, [&](std::size_t a, std::size_t b) { return x[idx[a]] == x[idx[b]]; });
  const std::uint64_t tie_xy = tied_pairs(
      n, [&](std::size_t a, std::size_t b) { return x[idx[a]] == x[idx[b]] && y[idx[a]] == y[idx[b]]; });
  std::vector<double> ys(n), tmp(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  const std::uint64_t swaps = merge_count(ys, tmp, 0, n);
  const std::uint64_t tie_y = tied_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });
  if (tie_x == n0 || tie_y == n0) fail(Errc::DegenerateInput, "krcc is undefined for constant input");
  // concordant - discordant
  const double s = static_cast<double>(n0) - static_cast<double>(tie_x) - static_cast<double>(tie_y) +
                   static_cast<double>(tie_xy) - 2.0 * static_cast<double>(swaps);
  const double denom = std::sqrt(static_cast<double>(n0 - tie_x)) * std::sqrt(static_cast<double>(n0 - tie_y));
  return std::clamp(s / denom, -1.0, 1.0);
}

double plcc(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 2, "plcc");
  return pearson(x, y, "plcc");
}

double rmse(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 1, "rmse");
  double acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(acc / static_cast<double>(x.size()));
}

namespace {

// 1 / (1 + exp(z)) without overflow.
double inv_logit_neg(double z) {
  if (z >= 0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

using Vec5 = Eigen::Matrix<double, 5, 1>;

double rss_of(std::span<const double> u, std::span<const double> y, const Vec5& b) {
  double acc = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double s = inv_logit_neg(b[1] * (u[i] - b[2]));
    const double r = b[0] * (0.5 - s) + b[3] * u[i] + b[4] - y[i];
    acc += r * r;
  }
  return acc;
}

}  // namespace

double logistic_map(double x, const LogisticParams& p) {
  const auto& b = p.beta;
  return b[0] * (0.5 - inv_logit_neg(b[1] * (x - b[2]))) + b[3] * x + b[4];
}

std::vector<double> logistic_map(std::span<const double> x, const LogisticParams& p) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = logistic_map(x[i], p);
  return y;
}

LogisticFit fit_logistic(std::span<const double> pred, std::span<const double> mos) {
  check_pair(pred, mos, 2, "fit_logistic");
  const std::size_t n = pred.size();
  const double nd = static_cast<double>(n);
  const double mx = std::accumulate(pred.begin(), pred.end(), 0.0) / nd;
  const double my = std::accumulate(mos.begin(), mos.end(), 0.0) / nd;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (pred[i] - mx) * (pred[i] - mx);
    sxy += (pred[i] - mx) * (mos[i] - my);
  }

  LogisticFit linear;
  linear.linear_fallback = true;
  const double slope = sxx > 0 ? sxy / sxx : 0.0;
  linear.params.beta = {0.0, 0.0, mx, slope, my - slope * mx};
  for (std::size_t i = 0; i < n; ++i) {
    const double r = slope * (pred[i] - mx) + my - mos[i];
    linear.rss += r * r;
  }
  if (n < 5 || sxx == 0.0) return linear;

  // Fit against standardized predictions for conditioning, then map back.
  const double sd = std::sqrt(sxx / nd);
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = (pred[i] - mx) / sd;
  const auto [lo, hi] = std::minmax_element(mos.begin(), mos.end());
  Vec5 b;
  b << (*hi - *lo), 4.0, 0.0, 0.0, my;

  double rss = rss_of(u, mos, b);
  double lambda = 1e-3;
  int it = 0;
  Eigen::Matrix<double, Eigen::Dynamic, 5> jac(n, 5);
  Eigen::VectorXd res(n);
  for (; it < 500; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const double d = u[i] - b[2];
      const double s = inv_logit_neg(b[1] * d);
      const double ds = s * (1.0 - s);
      jac(i, 0) = 0.5 - s;
      jac(i, 1) = b[0] * ds * d;
      jac(i, 2) = -b[0] * ds * b[1];
      jac(i, 3) = u[i];
      jac(i, 4) = 1.0;
      res[i] = b[0] * (0.5 - s) + b[3] * u[i] + b[4] - mos[i];
    }
    const Eigen::Matrix<double, 5, 5> jtj = jac.transpose() * jac;
    const Vec5 g = jac.transpose() * res;
    bool accepted = false;
    double new_rss = rss;
    while (lambda < 1e16) {
      Eigen::Matrix<double, 5, 5> a = jtj;
      for (int k = 0; k < 5; ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-12);
      const Vec5 step = a.ldlt().solve(-g);
      if (step.allFinite()) {
        const Vec5 cand = b + step;
        new_rss = rss_of(u, mos, cand);
        if (std::isfinite(new_rss) && new_rss < rss) {
          b = cand;
          lambda = std::max(lambda / 10.0, 1e-15);
          accepted = true;
          break;
        }
      }
      lambda *= 10.0;
    }
    if (!accepted) break;
    const double change = (rss - new_rss) / std::max(rss, 1e-300);
    rss = new_rss;
    if (change < 1e-10 || rss < 1e-28) {
      ++it;
      break;
    }
  }

  LogisticFit fit;
  fit.iterations = it;
  fit.params.beta = {b[0], b[1] / sd, mx + sd * b[2], b[3] / sd, b[4] - b[3] * mx / sd};
  // recomputed in original units so the comparison is like-for-like
  fit.rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = logistic_map(pred[i], fit.params) - mos[i];
    fit.rss += r * r;
  }
  if (!std::isfinite(fit.rss) || fit.rss > linear.rss) {
    linear.iterations = it;
    return linear;
  }
  return fit;
}

EvalReport evaluate(std::span<const double> pred, std::span<const double> mos) {
  check_pair(pred, mos, 2, "evaluate");
  EvalReport r;
  r.n = pred.size();
  r.srcc = srcc(pred, mos);
  r.krcc = krcc(pred, mos);
  const LogisticFit fit = fit_logistic(pred, mos);
  r.fitted = fit.params;
  r.linear_fallback = fit.linear_fallback;
  const auto mapped = logistic_map(pred, fit.params);
  r.plcc = plcc(mapped, mos);
  r.rmse = rmse(mapped, mos);
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::json j{{"n", n},           {"srcc", srcc}, {"plcc", plcc}, {"krcc", krcc},
                   {"rmse", rmse},     {"logistic", fitted.beta},      {"linear_fallback", linear_fallback}};
  return j.dump(2);
}

}  // namespace pcqa
