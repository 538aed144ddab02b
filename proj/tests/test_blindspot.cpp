#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "pgdenoise/blindspot.hpp"
#include "pgdenoise/errors.hpp"
#include "pgdenoise/metrics.hpp"
#include "pgdenoise/rng.hpp"

using namespace pgd;
namespace fs = std::filesystem;

namespace {

BlindspotPredictor random_model(int radius, std::vector<int> hidden, Rng& rng,
                                LossKind kind = LossKind::uncalibrated,
                                NoiseParams noise = {0.05, 0.01}) {
  TrainConfig cfg;
  cfg.patch_radius = radius;
  cfg.hidden_sizes = std::move(hidden);
  cfg.loss_kind = kind;
  cfg.noise_init = noise;
  BlindspotPredictor m = init_predictor(cfg, rng);
  // Jitter so biases are nonzero too.
  for (double& w : m.weights) w += 0.05 * rng.normal();
  return m;
}

std::vector<TrainSample> random_batch(int count, int input_dim, Rng& rng) {
  std::vector<TrainSample> batch(count);
  for (auto& s : batch) {
    s.patch.resize(input_dim);
    for (double& v : s.patch) v = rng.uniform(0.0, 1.0);
    s.y = rng.uniform(0.0, 1.0);
  }
  return batch;
}

double sample_loss(const BlindspotPredictor& m, const TrainSample& s, LossKind kind,
                   double lambda_reg) {
  const Prediction p = forward(m, s.patch);
  switch (kind) {
    case LossKind::uncalibrated:
      return loss_uncalibrated(s.y, p.mu, p.log_var);
    case LossKind::pg_marginal:
      return loss_pg_marginal(s.y, p.mu, p.log_var, m.noise.a, m.noise.b);
    case LossKind::gaussian:
      return loss_gaussian(s.y, p.mu, p.log_var, m.noise.b);
    case LossKind::poisson:
      return loss_poisson(s.y, p.mu, p.log_var, m.noise.a);
    case LossKind::pg_regularized:
      return loss_pg_marginal(s.y, p.mu, p.log_var, m.noise.a, m.noise.b) +
             loss_pg_regularizer(p.log_var, lambda_reg);
  }
  return 0;
}

double batch_loss(const BlindspotPredictor& m, const std::vector<TrainSample>& batch,
                  LossKind kind, double lambda_reg) {
  double sum = 0;
  for (const auto& s : batch) sum += sample_loss(m, s, kind, lambda_reg);
  return sum / static_cast<double>(batch.size());
}

Image noisy_texture(int size, uint64_t seed) {
  Rng rng(seed);
  Image img = synth_texture(size, rng);
  Rng noise = rng.split(streams::kNoise);
  return pg_corrupt(img, {0.02, 0.004}, noise);
}

}  // namespace

TEST_CASE("gather_patch never reads the center pixel") {
  Rng rng(1);
  Image img = noisy_texture(16, 3);
  const int r = 3;
  const int d = (2 * r + 1) * (2 * r + 1) - 1;
  std::vector<double> before(d), after(d);
  // Includes corners and edges, where reflection could echo the center.
  for (int y : {0, 1, 2, 8, 14, 15}) {
    for (int x : {0, 1, 2, 8, 14, 15}) {
      gather_patch(img, x, y, r, before);
      const float old = img.at(x, y);
      img.at(x, y) = old + 1.0f;
      gather_patch(img, x, y, r, after);
      img.at(x, y) = old;
      CHECK(before == after);
    }
  }
}

TEST_CASE("forward is center-invariant and deterministic") {
  Rng rng(2);
  const BlindspotPredictor m = random_model(2, {8, 8}, rng);
  Image img = noisy_texture(12, 4);
  std::vector<double> patch(m.input_dim());
  gather_patch(img, 5, 6, 2, patch);
  const Prediction p1 = forward(m, patch);
  const Prediction p2 = forward(m, patch);
  CHECK(p1.mu == p2.mu);
  CHECK(p1.log_var == p2.log_var);
}

TEST_CASE("zero weights give mu = 0 and unit variance") {
  TrainConfig cfg;
  cfg.patch_radius = 2;
  cfg.hidden_sizes = {6};
  Rng rng(3);
  BlindspotPredictor m = init_predictor(cfg, rng);
  std::fill(m.weights.begin(), m.weights.end(), 0.0);
  std::vector<double> patch(m.input_dim(), 0.7);
  const Prediction p = forward(m, patch);
  CHECK(p.mu == 0.0);
  CHECK(p.log_var == 0.0);
}

TEST_CASE("predict_image is center-invariant at every pixel (blindspot property)") {
  Rng rng(5);
  const BlindspotPredictor m = random_model(2, {8, 8}, rng);
  Image img = noisy_texture(10, 6);
  const PriorPrediction base = predict_image(m, img);
  Rng pert(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int x = static_cast<int>(pert.below(img.width));
    const int y = static_cast<int>(pert.below(img.height));
    Image mod = img;
    mod.at(x, y) += static_cast<float>(pert.uniform(-0.5, 0.5));
    const PriorPrediction out = predict_image(m, mod);
    CHECK(out.mu.at(x, y) == base.mu.at(x, y));
    CHECK(out.var.at(x, y) == base.var.at(x, y));
  }
}

TEST_CASE("predict_image locality matches the receptive field") {
  Rng rng(6);
  const int r = 2;
  const BlindspotPredictor m = random_model(r, {8}, rng);
  const Image img = noisy_texture(12, 7);
  const PriorPrediction base = predict_image(m, img);
  Image mod = img;
  const int px = 6, py = 5;
  mod.at(px, py) += 0.25f;
  const PriorPrediction out = predict_image(m, mod);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const int dist = std::max(std::abs(x - px), std::abs(y - py));
      if (dist > r) {
        CHECK(out.mu.at(x, y) == base.mu.at(x, y));
      } else if (dist == 0) {
        CHECK(out.mu.at(x, y) == base.mu.at(x, y));
        CHECK(out.var.at(x, y) == base.var.at(x, y));
      }
    }
  }
}

TEST_CASE("predict_image keeps variance positive and shapes equal") {
  Rng rng(7);
  const BlindspotPredictor m = random_model(2, {8}, rng);
  const Image img = noisy_texture(9, 8);
  const PriorPrediction p = predict_image(m, img);
  CHECK(p.mu.width == img.width);
  CHECK(p.var.height == img.height);
  for (float v : p.var.data) CHECK(v > 0.0f);
}

TEST_CASE("loss_uncalibrated closed-form values") {
  CHECK(loss_uncalibrated(0.3, 0.3, 0.0) == doctest::Approx(0.0));
  CHECK(loss_uncalibrated(0.6, 0.5, std::log(0.01)) ==
        doctest::Approx(1.0 + std::log(0.01)).epsilon(1e-9));
  CHECK(1.0 + std::log(0.01) == doctest::Approx(-3.60517).epsilon(1e-5));
}

TEST_CASE("loss_uncalibrated is convex in log-variance with minimum at log r^2") {
  const double y = 0.8, mu = 0.55;
  const double lv_star = std::log((y - mu) * (y - mu));
  const double h = 1e-3;
  const double f0 = loss_uncalibrated(y, mu, lv_star - h);
  const double f1 = loss_uncalibrated(y, mu, lv_star);
  const double f2 = loss_uncalibrated(y, mu, lv_star + h);
  CHECK(f0 > f1);
  CHECK(f2 > f1);
  // Positive second difference at several points.
  for (double lv : {-3.0, -1.0, 0.0, 2.0}) {
    const double a = loss_uncalibrated(y, mu, lv - h);
    const double b = loss_uncalibrated(y, mu, lv);
    const double c = loss_uncalibrated(y, mu, lv + h);
    CHECK(a + c - 2 * b > 0);
  }
}

TEST_CASE("loss identity lattice") {
  Rng rng(10);
  for (int i = 0; i < 300; ++i) {
    const double y = rng.uniform(0.0, 1.0);
    const double mu = rng.uniform(0.0, 1.0);
    const double lv = rng.uniform(-6.0, 2.0);
    const double a = rng.uniform(0.0, 0.2);
    const double b = rng.uniform(1e-4, 0.05);

    CHECK(loss_pg_marginal(y, mu, lv, 0.0, b) == loss_gaussian(y, mu, lv, b));
    CHECK(loss_pg_marginal(y, mu, lv, a, 0.0) == loss_poisson(y, mu, lv, a));
    CHECK(loss_pg_regularizer(lv, 0.0) == 0.0);
    // Uncalibrated with sigma_hat^2 = a*mu + b + sigma^2 equals the marginal.
    const double total = a * mu + b + std::exp(lv);
    CHECK(loss_uncalibrated(y, mu, std::log(total)) ==
          doctest::Approx(loss_pg_marginal(y, mu, lv, a, b)).epsilon(1e-12));
  }
}

TEST_CASE("regularizer value and gradient scale") {
  const double lv = std::log(0.01);  // sigma = 0.1
  CHECK(loss_pg_regularizer(lv, 1.0) == doctest::Approx(0.1));
  CHECK(loss_pg_regularizer(lv, 2.5) == doctest::Approx(0.25));
}

TEST_CASE("analytic gradients match central finite differences for all losses") {
  Rng rng(42);
  const LossKind kinds[] = {LossKind::uncalibrated, LossKind::pg_marginal, LossKind::gaussian,
                            LossKind::poisson, LossKind::pg_regularized};
  for (int config = 0; config < 20; ++config) {
    const LossKind kind = kinds[config % 5];
    const bool learn_noise = config % 2 == 0;
    const double lambda_reg = kind == LossKind::pg_regularized ? 0.5 : 0.0;
    BlindspotPredictor m = random_model(1, {6, 5}, rng, kind);
    const auto batch = random_batch(3, m.input_dim(), rng);

    double loss = 0;
    const auto grad = backward(m, batch, kind, lambda_reg, learn_noise, &loss);
    REQUIRE(std::isfinite(loss));
    const bool has_noise_grads = learn_noise && kind != LossKind::uncalibrated;
    REQUIRE(grad.size() == m.weights.size() + (has_noise_grads ? 2 : 0));

    double worst = 0;
    for (size_t i = 0; i < grad.size(); ++i) {
      double* target = i < m.weights.size()        ? &m.weights[i]
                       : i == m.weights.size()     ? &m.noise.a
                                                   : &m.noise.b;
      const double saved = *target;
      const double h = 1e-4 * std::max(std::fabs(saved), 0.1);
      *target = saved + h;
      const double fp = batch_loss(m, batch, kind, lambda_reg);
      *target = saved - h;
      const double fm = batch_loss(m, batch, kind, lambda_reg);
      *target = saved;
      const double fd = (fp - fm) / (2 * h);
      const double rel = std::fabs(grad[i] - fd) / std::max({std::fabs(grad[i]), std::fabs(fd), 1e-6});
      worst = std::max(worst, rel);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("duplicating the batch leaves the mean-loss gradient unchanged") {
  Rng rng(77);
  BlindspotPredictor m = random_model(1, {6}, rng);
  const auto batch = random_batch(4, m.input_dim(), rng);
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  double l1 = 0, l2 = 0;
  const auto g1 = backward(m, batch, LossKind::uncalibrated, 0.0, false, &l1);
  const auto g2 = backward(m, doubled, LossKind::uncalibrated, 0.0, false, &l2);
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
  REQUIRE(g1.size() == g2.size());
  for (size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-9));
}

TEST_CASE("training reduces the loss on a small synthetic set") {
  std::vector<Image> dataset;
  for (int i = 0; i < 10; ++i) dataset.push_back(noisy_texture(24, 1000 + i));

  TrainConfig cfg;
  cfg.loss_kind = LossKind::uncalibrated;
  cfg.epochs = 20;
  cfg.batches_per_epoch = 8;
  cfg.batch_size = 2;
  cfg.crop_size = 16;
  cfg.patch_radius = 2;
  cfg.hidden_sizes = {12, 12};
  cfg.optimizer.lr = 0.005;
  Rng rng(50);
  TrainLog log;
  train(dataset, cfg, rng, &log);
  REQUIRE(log.epochs.size() == 20);
  CHECK(log.epochs.back().train_loss < log.epochs.front().train_loss);
  CHECK(log.epochs.back().val_loss < log.epochs.front().val_loss);
}

TEST_CASE("training is deterministic given the seed") {
  std::vector<Image> dataset;
  for (int i = 0; i < 4; ++i) dataset.push_back(noisy_texture(20, 88 + i));
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batches_per_epoch = 4;
  cfg.batch_size = 2;
  cfg.crop_size = 12;
  cfg.patch_radius = 2;
  cfg.hidden_sizes = {8};
  Rng r1(31), r2(31);
  const BlindspotPredictor m1 = train(dataset, cfg, r1);
  const BlindspotPredictor m2 = train(dataset, cfg, r2);
  CHECK(m1.weights == m2.weights);
}

TEST_CASE("zero epochs returns the initialized model untouched") {
  std::vector<Image> dataset{noisy_texture(20, 5)};
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.crop_size = 12;
  cfg.patch_radius = 2;
  cfg.hidden_sizes = {8};
  Rng rng(9);
  const BlindspotPredictor trained = train(dataset, cfg, rng);
  Rng init_rng = Rng(9).split(streams::kWeightInit);
  const BlindspotPredictor expected = init_predictor(cfg, init_rng);
  CHECK(trained.weights == expected.weights);
}

TEST_CASE("divergence aborts with diagnostics") {
  std::vector<Image> dataset{noisy_texture(20, 6), noisy_texture(20, 7)};
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batches_per_epoch = 4;
  cfg.batch_size = 1;
  cfg.crop_size = 12;
  cfg.patch_radius = 2;
  cfg.hidden_sizes = {8};
  cfg.optimizer.lr = 1e6;  // guarantees exp overflow in the variance head
  Rng rng(12);
  CHECK_THROWS_AS(train(dataset, cfg, rng), TrainDivergedError);
  try {
    Rng rng2(12);
    train(dataset, cfg, rng2);
  } catch (const TrainDivergedError& e) {
    CHECK(e.diagnostics().find("epoch=") != std::string::npos);
    CHECK(e.diagnostics().find("lr=") != std::string::npos);
  }
}

TEST_CASE("invalid train configs are rejected") {
  std::vector<Image> dataset{noisy_texture(20, 8)};
  TrainConfig cfg;
  cfg.crop_size = 3;  // < 2*radius + 1
  cfg.patch_radius = 2;
  Rng rng(1);
  CHECK_THROWS_AS(train(dataset, cfg, rng), ArgumentError);
  CHECK_THROWS_AS(train({}, TrainConfig{}, rng), ArgumentError);
}

TEST_CASE("checkpoint round-trip preserves the model exactly") {
  Rng rng(61);
  BlindspotPredictor m = random_model(2, {10, 7}, rng, LossKind::pg_regularized, {0.033, -0.002});
  const std::string path = (fs::temp_directory_path() / "pgd_t_ckpt.json").string();
  TrainConfig cfg;
  cfg.patch_radius = m.patch_radius;
  cfg.hidden_sizes = m.hidden_sizes;
  save_checkpoint(m, path, &cfg);
  const BlindspotPredictor back = load_checkpoint(path);
  CHECK(back.patch_radius == m.patch_radius);
  CHECK(back.hidden_sizes == m.hidden_sizes);
  CHECK(back.trained_loss == m.trained_loss);
  CHECK(back.noise.a == m.noise.a);
  CHECK(back.noise.b == m.noise.b);
  CHECK(back.weights == m.weights);
  fs::remove(path);
}

TEST_CASE("checkpoint load failures carry categories") {
  try {
    load_checkpoint("/nonexistent/pgd_ckpt.json");
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.category() == "checkpoint-not-found");
  }
  const std::string path = (fs::temp_directory_path() / "pgd_t_badckpt.json").string();
  std::ofstream(path) << "{\"format\": \"something-else\"}";
  try {
    load_checkpoint(path);
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.category() == "checkpoint-parse");
  }
  fs::remove(path);
}

TEST_CASE("training log CSV has the documented schema") {
  TrainLog log;
  log.epochs.push_back({1, 0.5, 0.625, 3e-4});
  log.epochs.push_back({2, 0.25, 0.5, 1.5e-4});
  const std::string csv = log.csv();
  CHECK(csv.find("epoch,train_loss,val_loss,lr\n") == 0);
  CHECK(csv.find("\n1,0.5,0.625,3e-04\n") != std::string::npos);
}
