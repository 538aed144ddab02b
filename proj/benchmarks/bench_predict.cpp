#include <benchmark/benchmark.h>

#include "pgdenoise/blindspot.hpp"
#include "pgdenoise/metrics.hpp"

using namespace pgd;

namespace {

BlindspotPredictor make_model(int radius, std::vector<int> hidden) {
  TrainConfig cfg;
  cfg.patch_radius = radius;
  cfg.hidden_sizes = std::move(hidden);
  Rng rng(3);
  return init_predictor(cfg, rng);
}

}  // namespace

static void BM_forward(benchmark::State& state) {
  const BlindspotPredictor model = make_model(3, {32, 32});
  Rng rng(4);
  std::vector<double> patch(model.input_dim());
  for (double& v : patch) v = rng.uniform();
  for (auto _ : state) {
    const Prediction p = forward(model, patch);
    benchmark::DoNotOptimize(p.mu);
  }
}
BENCHMARK(BM_forward);

static void BM_predict_image_64(benchmark::State& state) {
  const BlindspotPredictor model = make_model(3, {32, 32});
  Rng tex(5);
  const Image img = synth_texture(64, tex);
  for (auto _ : state) {
    const PriorPrediction p = predict_image(model, img);
    benchmark::DoNotOptimize(p.mu.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(img.size()));
}
BENCHMARK(BM_predict_image_64);

static void BM_backward_batch(benchmark::State& state) {
  const BlindspotPredictor model = make_model(3, {32, 32});
  Rng rng(6);
  std::vector<TrainSample> batch(64);
  for (auto& s : batch) {
    s.patch.resize(model.input_dim());
    for (double& v : s.patch) v = rng.uniform();
    s.y = rng.uniform();
  }
  for (auto _ : state) {
    double loss = 0;
    const auto grad = backward(model, batch, LossKind::uncalibrated, 0.0, false, &loss);
    benchmark::DoNotOptimize(grad.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(batch.size()));
}
BENCHMARK(BM_backward_batch);
