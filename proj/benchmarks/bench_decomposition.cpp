#include <benchmark/benchmark.h>

#include <random>

#include "nof/decomposition.hpp"

namespace {

// Three Laplace sources through a fixed 32-channel mixing.
Eigen::MatrixXd mixture(Eigen::Index samples) {
  std::mt19937_64 rng(1);
  std::exponential_distribution<double> ex(1.0);
  std::bernoulli_distribution sign(0.5);
  std::normal_distribution<double> g;
  Eigen::MatrixXd s(3, samples);
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = (sign(rng) ? 1.0 : -1.0) * ex(rng);
  Eigen::MatrixXd a(32, 3);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = g(rng);
  return a * s;
}

void BM_Whiten(benchmark::State& state) {
  const auto x = mixture(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(nof::center_and_whiten(x, nof::ComponentSelection::fixed(3)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Whiten)->Arg(5000)->Arg(25000)->Unit(benchmark::kMillisecond);

void BM_FastIca(benchmark::State& state) {
  const auto white = nof::center_and_whiten(mixture(state.range(0)), nof::ComponentSelection::fixed(3));
  nof::FastIcaConfig cfg;
  cfg.seed = 3;
  for (auto _ : state) benchmark::DoNotOptimize(nof::fastica(white, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FastIca)->Arg(5000)->Arg(25000)->Unit(benchmark::kMillisecond);

}  // namespace
