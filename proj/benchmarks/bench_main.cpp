#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "pcqa/evaluation.hpp"
#include "pcqa/gcn_model.hpp"
#include "pcqa/ops.hpp"
#include "pcqa/projection.hpp"
#include "pcqa/rng.hpp"

using namespace pcqa;

namespace {

Tensor<float> noise(Shape s, Rng& rng) {
  Tensor<float> t(std::move(s));
  for (auto& v : t.storage()) v = static_cast<float>(rng.uniform(-1, 1));
  return t;
}

// first stage of the default backbone, forward and backward
void BM_Conv2dStage(benchmark::State& st) {
  const std::size_t batch = static_cast<std::size_t>(st.range(0));
  Rng rng(1);
  const Tensor<float> x = noise({batch, 8, 112, 112}, rng);
  Var<float> w(noise({16, 8, 3, 3}, rng), true), b(noise({16}, rng), true);
  for (auto _ : st) {
    Var<float> y = conv2d(Var<float>(x), w, b, {2, 1});
    backward(sum(y));
    benchmark::DoNotOptimize(w.grad().raw());
    w.zero_grad();
    b.zero_grad();
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_Conv2dStage)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_RenderOrtho(benchmark::State& st) {
  const PointCloud pc = normalize_unit_ball(synth_shape(ShapeKind::Torus, static_cast<std::size_t>(st.range(0)), 3));
  const ProjectionConfig cfg;
  for (auto _ : st) benchmark::DoNotOptimize(render_ortho(pc, cfg).pixels.data());
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_RenderOrtho)->Arg(20000)->Arg(60000)->Arg(200000)->Unit(benchmark::kMillisecond);

void BM_ProjectViews(benchmark::State& st) {
  const PointCloud pc = synth_shape(ShapeKind::Sphere, 60000, 4);
  const ProjectionConfig cfg;
  for (auto _ : st) benchmark::DoNotOptimize(project_views(pc, cfg, 1).horizontal.images.size());
}
BENCHMARK(BM_ProjectViews)->Unit(benchmark::kMillisecond);

void BM_ModelScore(benchmark::State& st) {
  QualityModel<float> model{ModelConfig{}};
  Rng rng(5);
  ProjectionGroup h, v;
  v.direction = ViewDirection::Vertical;
  for (std::size_t i = 0; i < model.config().n_views(); ++i) {
    Image img(224, 224);
    for (auto& p : img.pixels) p = static_cast<float>(rng.uniform());
    h.images.push_back(img);
    v.images.push_back(img);
  }
  for (auto _ : st) benchmark::DoNotOptimize(model.predict(h, v));
}
BENCHMARK(BM_ModelScore)->Unit(benchmark::kMillisecond);

void BM_Metrics(benchmark::State& st) {
  const std::size_t n = static_cast<std::size_t>(st.range(0));
  Rng rng(6);
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.uniform();
    y[i] = x[i] + rng.normal(0, 0.2);
  }
  for (auto _ : st) {
    benchmark::DoNotOptimize(srcc(x, y));
    benchmark::DoNotOptimize(krcc(x, y));
    benchmark::DoNotOptimize(plcc(x, y));
  }
  st.SetComplexityN(static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Metrics)->RangeMultiplier(8)->Range(64, 32768)->Complexity(benchmark::oNLogN);

void BM_FitLogistic(benchmark::State& st) {
  Rng rng(7);
  std::vector<double> x(400), y(400);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.uniform(0, 10);
    y[i] = 10.0 / (1.0 + std::exp(-(x[i] - 5.0))) + rng.normal(0, 0.3);
  }
  for (auto _ : st) benchmark::DoNotOptimize(fit_logistic(x, y).rss);
}
BENCHMARK(BM_FitLogistic);

}  // namespace

// the packaged benchmark_main archive is LTO bytecode tied to one compiler build
BENCHMARK_MAIN();
