#include <benchmark/benchmark.h>

#include "qrt/baselines.hpp"
#include "qrt/data.hpp"
#include "qrt/random.hpp"
#include "qrt/solver.hpp"
#include "qrt/tree.hpp"

namespace {

// Gaussian design with a heteroscedastic linear target.
std::pair<qrt::Matrix, qrt::Vector> gaussian_problem(std::int64_t n, std::int64_t d) {
  qrt::RandomStream rng(17, 0);
  qrt::Matrix x(n, d);
  qrt::Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      x(i, j) = rng.normal();
      s += x(i, j) / static_cast<double>(j + 1);
    }
    y[i] = s + (1.0 + std::abs(x(i, 0))) * rng.normal();
  }
  return {x, y};
}

void BM_FitQuantileRegression(benchmark::State& state) {
  const auto [x, y] = gaussian_problem(state.range(0), state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(qrt::fit_quantile_regression(x, y, qrt::QuantileLevel(0.3)));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FitQuantileRegression)
    ->ArgsProduct({{50, 350, 1000, 4000}, {1}})
    ->Args({350, 13})
    ->Unit(benchmark::kMicrosecond);

void BM_FitOls(benchmark::State& state) {
  const auto [x, y] = gaussian_problem(state.range(0), 13);
  for (auto _ : state) benchmark::DoNotOptimize(qrt::fit_ols(x, y));
}
BENCHMARK(BM_FitOls)->Arg(350)->Unit(benchmark::kMicrosecond);

void BM_BestSplitSynthetic(benchmark::State& state) {
  const auto ds = qrt::generate_synthetic(static_cast<std::size_t>(state.range(0)), 42);
  qrt::FitConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        qrt::best_split(ds.features(), ds.target(), qrt::QuantileLevel(0.5), cfg));
  }
}
BENCHMARK(BM_BestSplitSynthetic)->Arg(700)->Unit(benchmark::kMillisecond);

void BM_FitTreeSynthetic(benchmark::State& state) {
  const auto ds = qrt::generate_synthetic(700, 42);
  qrt::FitConfig cfg;
  cfg.max_depth = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(qrt::fit_tree(ds.features(), ds.target(), cfg));
  }
}
BENCHMARK(BM_FitTreeSynthetic)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);

// Boston-sized design: 350 training rows, 13 features, depth 2.
void BM_FitTreeWide(benchmark::State& state) {
  const auto [x, y] = gaussian_problem(350, 13);
  qrt::FitConfig cfg;
  cfg.max_depth = 2;
  for (auto _ : state) benchmark::DoNotOptimize(qrt::fit_tree(x, y, cfg));
}
BENCHMARK(BM_FitTreeWide)->Unit(benchmark::kMillisecond)->Iterations(1);

void BM_FitMeanTree(benchmark::State& state) {
  const auto ds = qrt::generate_synthetic(700, 42);
  qrt::FitConfig cfg;
  cfg.max_depth = 3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(qrt::fit_mean_tree(ds.features(), ds.target(), cfg));
  }
}
BENCHMARK(BM_FitMeanTree)->Unit(benchmark::kMicrosecond);

void BM_PredictTree(benchmark::State& state) {
  const auto ds = qrt::generate_synthetic(700, 42);
  qrt::FitConfig cfg;
  const auto tree = qrt::fit_tree(ds.features(), ds.target(), cfg);
  const auto probe = qrt::generate_synthetic(10000, 7);
  for (auto _ : state) benchmark::DoNotOptimize(qrt::predict_tree(tree, probe.features()));
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_PredictTree)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
