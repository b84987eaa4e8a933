#include <benchmark/benchmark.h>

#include <random>

#include "nof/clustering.hpp"

namespace {

Eigen::MatrixXd blobs(Eigen::Index n, Eigen::Index d, int k) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = g(rng) + 6.0 * static_cast<double>(i % k);
  return x;
}

void BM_EmFit(benchmark::State& state) {
  const auto x = blobs(state.range(0), 4, 3);
  nof::EmConfig cfg;
  cfg.covariance = state.range(1) ? nof::CovarianceType::full : nof::CovarianceType::diagonal;
  for (auto _ : state) benchmark::DoNotOptimize(nof::em_fit(x, 3, cfg));
}
BENCHMARK(BM_EmFit)->Args({200, 0})->Args({200, 1})->Args({2000, 1})->Unit(benchmark::kMillisecond);

void BM_Agglomerative(benchmark::State& state) {
  const auto x = blobs(state.range(0), 4, 3);
  for (auto _ : state) benchmark::DoNotOptimize(nof::agglomerative_hierarchy(x, nof::Linkage::average));
}
BENCHMARK(BM_Agglomerative)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_Divisive(benchmark::State& state) {
  const auto x = blobs(state.range(0), 4, 3);
  for (auto _ : state) benchmark::DoNotOptimize(nof::divisive_hierarchy(x, nof::DivisiveConfig{}));
}
BENCHMARK(BM_Divisive)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

}  // namespace
