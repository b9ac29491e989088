#include <benchmark/benchmark.h>

#include "blompe/divergences.hpp"
#include "blompe/em.hpp"
#include "blompe/simulate.hpp"

using namespace blompe;

namespace {

BlompeModel bench_truth(int K, int D) {
  TrueModelSpec spec;
  spec.K = K;
  spec.D = D;
  spec.separation = 4.0;
  spec.seed = 42;
  return make_true_model(spec);
}

void BM_CondDensity(benchmark::State& state) {
  const BlompeModel m = bench_truth(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const SampledData s = sample_dataset(m, 1, 1);
  const Vector x = s.data.x(0), y = s.data.y(0);
  for (auto _ : state) benchmark::DoNotOptimize(log_cond_density(m, x, y));
}
BENCHMARK(BM_CondDensity)->Args({2, 4})->Args({4, 16})->Args({4, 64});

void BM_EStep(benchmark::State& state) {
  const BlompeModel m = bench_truth(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const SampledData s = sample_dataset(m, static_cast<std::size_t>(state.range(2)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(e_step(m, s.data).loglik);
  state.SetItemsProcessed(state.iterations() * state.range(2));
}
BENCHMARK(BM_EStep)->Args({2, 4, 2000})->Args({4, 16, 2000})->Args({4, 64, 2000});

void BM_Fit(benchmark::State& state) {
  const BlompeModel m = bench_truth(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const SampledData s = sample_dataset(m, 1000, 3);
  FitConfig config;
  config.n_starts = 1;
  config.seed = 5;
  for (auto _ : state) benchmark::DoNotOptimize(fit(s.data, m.index(), config).nll);
}
BENCHMARK(BM_Fit)->Args({2, 4})->Args({4, 16})->Unit(benchmark::kMillisecond);

void BM_MonteCarloDivergences(benchmark::State& state) {
  const ModelLaw a(bench_truth(2, 8));
  TrueModelSpec spec;
  spec.D = 8;
  spec.seed = 7;
  const ModelLaw b(make_true_model(spec));
  const SampledData s = sample_dataset(a.model(), 100, 4);
  for (auto _ : state) benchmark::DoNotOptimize(mc_divergences(a, b, s.data.Y(), 0.5, 20, 1).kl.value);
}
BENCHMARK(BM_MonteCarloDivergences)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
