#include <benchmark/benchmark.h>

#include "pgdenoise/metrics.hpp"
#include "pgdenoise/noise_model.hpp"
#include "pgdenoise/rng.hpp"

using namespace pgd;

static void BM_poisson_small_mean(benchmark::State& state) {
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(rng.poisson(4.0));
}
BENCHMARK(BM_poisson_small_mean);

static void BM_poisson_ptrs(benchmark::State& state) {
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(rng.poisson(25.0));
}
BENCHMARK(BM_poisson_ptrs);

static void BM_pg_corrupt_64(benchmark::State& state) {
  Rng tex(7);
  const Image img = synth_texture(64, tex);
  Rng rng(2);
  for (auto _ : state) {
    const Image out = pg_corrupt(img, {0.02, 0.0015}, rng);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(img.size()));
}
BENCHMARK(BM_pg_corrupt_64);

static void BM_synth_texture(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  uint64_t seed = 0;
  for (auto _ : state) {
    Rng rng(seed++);
    const Image img = synth_texture(size, rng);
    benchmark::DoNotOptimize(img.data.data());
  }
}
BENCHMARK(BM_synth_texture)->Arg(64)->Arg(128);
