#include <gtest/gtest.h>

#include <cmath>

#include "json.hpp"
#include "oracles.hpp"
#include "pcqa/error.hpp"
#include "pcqa/evaluation.hpp"

using namespace pcqa;
using V = std::vector<double>;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::IoError;
}

double linear_fit_rmse(const V& x, const V& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double b = sxy / sxx;
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) ss += std::pow(y[i] - (my + b * (x[i] - mx)), 2);
  return std::sqrt(ss / n);
}

}  // namespace

TEST(Ranks, AverageTies) {
  const V r = average_ranks(V{10, 20, 20, 5});
  EXPECT_EQ(r, (V{2, 3.5, 3.5, 1}));
}

TEST(Srcc, Examples) {
  EXPECT_DOUBLE_EQ(srcc(V{1, 2, 3}, V{10, 20, 30}), 1.0);
  EXPECT_DOUBLE_EQ(srcc(V{1, 2, 3}, V{3, 2, 1}), -1.0);
  EXPECT_EQ(code_of([] { srcc(V{1, 1, 1}, V{1, 2, 3}); }), Errc::DegenerateInput);
  EXPECT_EQ(code_of([] { srcc(V{1}, V{1}); }), Errc::DegenerateInput);
  EXPECT_EQ(code_of([] { srcc(V{1, 2}, V{1, 2, 3}); }), Errc::LengthMismatch);
}

TEST(Krcc, Examples) {
  EXPECT_DOUBLE_EQ(krcc(V{1, 2, 3, 4}, V{1, 2, 3, 4}), 1.0);
  EXPECT_NEAR(krcc(V{1, 2, 3, 4}, V{1, 3, 2, 4}), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(code_of([] { krcc(V{2, 2}, V{1, 2}); }), Errc::DegenerateInput);
}

TEST(PlccRmse, Examples) {
  const V x{1, 2, 3, 4.5};
  V y;
  for (double v : x) y.push_back(2 * v + 3);
  EXPECT_NEAR(plcc(x, y), 1.0, 1e-15);
  EXPECT_NEAR(rmse(V{0, 0}, V{3, 4}), std::sqrt(25.0 / 2.0), 1e-15);
  EXPECT_NEAR(rmse(V{0, 0}, V{3, 4}), 3.5355, 1e-4);
  EXPECT_EQ(rmse(V{2}, V{2}), 0.0);
  const V a{0.3, -1, 2, 5}, b{1, 0, 4, 2};
  EXPECT_EQ(plcc(a, b), plcc(b, a));
  EXPECT_EQ(code_of([] { plcc(V{1, 1, 1}, V{1, 2, 3}); }), Errc::DegenerateInput);
  EXPECT_EQ(code_of([] { rmse(V{}, V{}); }), Errc::DegenerateInput);
  EXPECT_EQ(code_of([] { plcc(V{1, NAN}, V{1, 2}); }), Errc::DegenerateInput);
}

TEST(Metrics, MatchOraclesOnRandomVectors) {
  Rng rng(1);
  int compared = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(9);
    const bool ties = t % 2 == 0;
    const V x = testutil::random_vector(n, rng, ties), y = testutil::random_vector(n, rng, ties);
    V xs = x, ys = y;
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    if (xs.front() == xs.back() || ys.front() == ys.back()) continue;
    ++compared;
    EXPECT_EQ(average_ranks(x), oracle::ranks(x));
    EXPECT_NEAR(srcc(x, y), oracle::spearman(x, y), 1e-12);
    EXPECT_NEAR(krcc(x, y), oracle::kendall_b(x, y), 1e-12);
    EXPECT_NEAR(plcc(x, y), oracle::pearson(x, y), 1e-12);
    EXPECT_NEAR(rmse(x, y), oracle::rmse(x, y), 1e-12);
  }
  EXPECT_GT(compared, 80);
}

TEST(Metrics, RankStatisticsInvariantUnderMonotoneTransforms) {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 3 + rng.below(30);
    const V x = testutil::random_vector(n, rng, t % 3 == 0), y = testutil::random_vector(n, rng, false);
    V ex, cube;
    for (double v : x) {
      ex.push_back(std::exp(v));
      cube.push_back(v * v * v);
    }
    const double s = srcc(x, y), k = krcc(x, y);
    EXPECT_NEAR(srcc(ex, y), s, 1e-12);
    EXPECT_NEAR(srcc(y, cube), s, 1e-12);
    EXPECT_NEAR(krcc(ex, y), k, 1e-12);
    EXPECT_NEAR(krcc(y, cube), k, 1e-12);
  }
}

TEST(Metrics, RangeInvariants) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 5 + rng.below(40);
    const V x = testutil::random_vector(n, rng, true), y = testutil::random_vector(n, rng, false);
    const EvalReport r = evaluate(x, y);
    for (double v : {r.srcc, r.plcc, r.krcc}) {
      EXPECT_GE(v, -1.0 - 1e-12);
      EXPECT_LE(v, 1.0 + 1e-12);
    }
    EXPECT_GE(r.rmse, 0.0);
  }
}

TEST(LogisticMap, Examples) {
  LogisticParams p;
  p.beta = {3.0, 0.0, 1.0, 2.0, -1.0};
  EXPECT_DOUBLE_EQ(logistic_map(0.7, p), 2.0 * 0.7 - 1.0);
  p.beta = {3.0, 1.5, 0.4, 2.0, -1.0};
  EXPECT_DOUBLE_EQ(logistic_map(0.4, p), 2.0 * 0.4 - 1.0);
  // no overflow at extreme arguments
  p.beta = {1.0, 1e6, 0.0, 0.0, 0.0};
  EXPECT_NEAR(logistic_map(1.0, p), 0.5, 1e-15);
  EXPECT_NEAR(logistic_map(-1.0, p), -0.5, 1e-15);
}

TEST(LogisticMap, MonotoneWhenSignConditionsHold) {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    LogisticParams p;
    const double s = rng.bernoulli() ? 1.0 : -1.0;
    p.beta = {s * rng.uniform(0, 5), s * rng.uniform(0, 5), rng.uniform(-1, 1), rng.uniform(0, 1), rng.uniform(-2, 2)};
    double prev = -INFINITY;
    for (double x = -3; x <= 3; x += 0.01) {
      const double y = logistic_map(x, p);
      EXPECT_GE(y, prev);
      prev = y;
    }
  }
}

TEST(FitLogistic, ReproducesKnownCurve) {
  Rng rng(5);
  const LogisticParams truth{{4.0, 3.0, 0.2, 0.5, 2.0}};
  V x, y;
  for (int i = 0; i < 60; ++i) {
    x.push_back(rng.uniform(-1.5, 1.5));
    y.push_back(logistic_map(x.back(), truth));
  }
  const LogisticFit fit = fit_logistic(x, y);
  EXPECT_LT(rmse(logistic_map(x, fit.params), y), 1e-6);
  EXPECT_FALSE(fit.linear_fallback);
}

TEST(FitLogistic, ReproducesKnownCurveAtLargeScale) {
  // predictions on a wide range, MOS on 0..100
  Rng rng(6);
  const LogisticParams truth{{80.0, 0.05, 40.0, 0.1, 50.0}};
  V x, y;
  for (int i = 0; i < 80; ++i) {
    x.push_back(rng.uniform(-20, 100));
    y.push_back(logistic_map(x.back(), truth));
  }
  const LogisticFit fit = fit_logistic(x, y);
  EXPECT_LT(rmse(logistic_map(x, fit.params), y), 1e-6);
}

TEST(FitLogistic, LinearDataFitsExactly) {
  V x, y;
  for (int i = 0; i < 20; ++i) {
    x.push_back(i * 0.3);
    y.push_back(1.5 * i * 0.3 - 2.0);
  }
  const LogisticFit fit = fit_logistic(x, y);
  EXPECT_LT(rmse(logistic_map(x, fit.params), y), 1e-9);
}

TEST(FitLogistic, NeverWorseThanLinear) {
  Rng rng(7);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 5 + rng.below(60);
    V x = testutil::random_vector(n, rng, t % 4 == 0), y;
    for (double v : x) y.push_back(std::tanh(2 * v) + rng.normal(0, 0.3));
    V xs = x;
    std::sort(xs.begin(), xs.end());
    if (xs.front() == xs.back()) continue;
    const LogisticFit fit = fit_logistic(x, y);
    EXPECT_LE(rmse(logistic_map(x, fit.params), y), linear_fit_rmse(x, y) + 1e-12);
    for (double b : fit.params.beta) EXPECT_TRUE(std::isfinite(b));
  }
}

TEST(FitLogistic, FewPointsUseLinearFit) {
  const LogisticFit fit = fit_logistic(V{1, 2, 3, 4}, V{2, 1, 4, 3});
  EXPECT_TRUE(fit.linear_fallback);
  EXPECT_EQ(fit.params.beta[0], 0.0);
  EXPECT_EQ(fit.params.beta[1], 0.0);
}

TEST(Evaluate, PerfectPrediction) {
  const V m{1, 3, 2, 5, 4, 7, 6};
  const EvalReport r = evaluate(m, m);
  EXPECT_DOUBLE_EQ(r.srcc, 1.0);
  EXPECT_NEAR(r.plcc, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.krcc, 1.0);
  EXPECT_LT(r.rmse, 1e-6);
  EXPECT_EQ(r.n, 7u);
}

TEST(Evaluate, AntiMonotone) {
  const V m{1, 2, 3, 4, 5, 6};
  const V p{6, 5, 4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(evaluate(p, m).srcc, -1.0);
}

TEST(Evaluate, MappedPlccNotBelowRaw) {
  Rng rng(8);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 6 + rng.below(60);
    V p = testutil::random_vector(n, rng, false), m;
    for (double v : p) m.push_back(5 + 3 * std::tanh(1.5 * v) + rng.normal(0, 0.4));
    EXPECT_GE(evaluate(p, m).plcc, plcc(p, m) - 1e-9);
  }
}

TEST(Evaluate, JsonReport) {
  const V m{1, 3, 2, 5, 4, 7, 6};
  const auto j = nlohmann::json::parse(evaluate(m, m).to_json());
  for (const char* key : {"srcc", "plcc", "krcc", "rmse", "n", "logistic"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j.at("logistic").size(), 5u);
}
