#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "nof/rulemining.hpp"

namespace {

nof::TransactionSet transactions(int n_rows, int n_items) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<nof::Itemset> rows;
  for (int r = 0; r < n_rows; ++r) {
    nof::Itemset s;
    for (int i = 0; i < n_items; ++i)
      if (u(rng) < 0.2 + 0.5 * static_cast<double>(i % 3) / 2.0) s.push_back(nof::Item::category("A" + std::to_string(i), "1"));
    rows.push_back(nof::canonical(s));
  }
  return nof::make_transactions(rows);
}

void BM_Apriori(benchmark::State& state) {
  const auto tx = transactions(static_cast<int>(state.range(0)), 14);
  for (auto _ : state) benchmark::DoNotOptimize(nof::apriori(tx, 0.1));
}
BENCHMARK(BM_Apriori)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_GenerateRules(benchmark::State& state) {
  const auto tx = transactions(static_cast<int>(state.range(0)), 14);
  const auto frequent = nof::apriori(tx, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(nof::generate_rules(frequent, 0.8, tx));
}
BENCHMARK(BM_GenerateRules)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
