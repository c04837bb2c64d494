#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pcqa {

/// Fractional ranks starting at 1; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> x);

double srcc(std::span<const double> x, std::span<const double> y);
/// Tau-b, O(n log n).
double krcc(std::span<const double> x, std::span<const double> y);
double plcc(std::span<const double> x, std::span<const double> y);
double rmse(std::span<const double> x, std::span<const double> y);

/// y = b[0] (1/2 - 1/(1 + exp(b[1] (x - b[2])))) + b[3] x + b[4]
struct LogisticParams {
  std::array<double, 5> beta{0, 0, 0, 0, 0};
};

double logistic_map(double x, const LogisticParams& p);
std::vector<double> logistic_map(std::span<const double> x, const LogisticParams& p);

struct LogisticFit {
  LogisticParams params;
  double rss = 0.0;
  int iterations = 0;
  bool linear_fallback = false;  // the straight-line fit was at least as good
};

/// Levenberg-Marquardt with an analytic Jacobian. Falls back to the
/// least-squares line whenever the nonlinear fit cannot beat it.
LogisticFit fit_logistic(std::span<const double> pred, std::span<const double> mos);

struct EvalReport {
  double srcc = 0, plcc = 0, krcc = 0, rmse = 0;
  LogisticParams fitted;
  bool linear_fallback = false;
  std::size_t n = 0;

  std::string to_json() const;
};

/// Rank metrics on raw predictions, PLCC / RMSE after the logistic mapping
/// (a straight line when fewer than 5 samples are given).
EvalReport evaluate(std::span<const double> pred, std::span<const double> mos);

}  // namespace pcqa
