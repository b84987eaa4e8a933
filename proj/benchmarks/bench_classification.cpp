#include <benchmark/benchmark.h>

#include <random>

#include "nof/classification.hpp"

namespace {

// Latency-like numeric attribute, one ROI attribute, label mostly set by latency band.
nof::LabeledTable table(std::size_t rows) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ti(0.0, 900.0);
  std::uniform_int_distribution<int> roi(0, 3), noise(0, 19);
  const char* rois[] = {"frontal", "central", "parietal", "occipital"};
  nof::LabeledTable t;
  t.attributes = {{"TI_max", nof::AttributeKind::numeric}, {"ROI", nof::AttributeKind::categorical}};
  for (std::size_t i = 0; i < rows; ++i) {
    const double latency = ti(rng);
    t.rows.push_back({latency, std::string(rois[roi(rng)])});
    std::string label = latency < 250 ? "N150" : latency < 550 ? "P300" : "SW700";
    if (noise(rng) == 0) label = "P300";
    t.labels.push_back(label);
  }
  return t;
}

void BM_BuildTree(benchmark::State& state) {
  const auto t = table(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(nof::build_tree(t, nof::TreeConfig{}));
}
BENCHMARK(BM_BuildTree)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace
