#include <benchmark/benchmark.h>

#include "pgdenoise/metrics.hpp"
#include "pgdenoise/noise_fit.hpp"
#include "pgdenoise/noise_model.hpp"

using namespace pgd;

static void BM_pg_nll_256(benchmark::State& state) {
  Rng tex(8);
  const Image clean = synth_texture(256, tex);
  Rng noise(9);
  const Image y = pg_corrupt_approx(clean, {0.02, 0.0015}, noise);
  const auto mask = clip_mask(y, 0.02, 0.03);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pg_nll(y, clean, {0.021, 0.0014}, mask));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(y.size()));
}
BENCHMARK(BM_pg_nll_256);

static void BM_fit_pg_256(benchmark::State& state) {
  Rng tex(10);
  const Image clean = synth_texture(256, tex);
  Rng noise(11);
  const Image y = pg_corrupt_approx(clean, {0.02, 0.0015}, noise);
  for (auto _ : state) {
    const FitResult fit = fit_pg(y, clean, FitConfig{});
    benchmark::DoNotOptimize(fit.params.a);
  }
}
BENCHMARK(BM_fit_pg_256);

static void BM_nelder_mead_rosenbrock(benchmark::State& state) {
  auto rosen = [](const std::vector<double>& p) {
    const double a = 1.0 - p[0];
    const double b = p[1] - p[0] * p[0];
    return a * a + 100.0 * b * b;
  };
  for (auto _ : state) {
    const SimplexResult r = nelder_mead(rosen, {-1.2, 1.0}, 1e-12, 2000);
    benchmark::DoNotOptimize(r.value);
  }
}
BENCHMARK(BM_nelder_mead_rosenbrock);

BENCHMARK_MAIN();
