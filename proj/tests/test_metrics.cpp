#include <cmath>
#include <limits>

#include "doctest.h"
#include "pgdenoise/errors.hpp"
#include "pgdenoise/metrics.hpp"
#include "pgdenoise/num_format.hpp"

using namespace pgd;

namespace {

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batches_per_epoch = 4;
  cfg.batch_size = 2;
  cfg.crop_size = 12;
  cfg.patch_radius = 2;
  cfg.hidden_sizes = {8};
  cfg.optimizer.lr = 0.005;
  return cfg;
}

}  // namespace

TEST_CASE("psnr closed-form values") {
  Image a(10, 10, 0.5f);
  Image b = a;
  CHECK(std::isinf(psnr(a, b)));

  for (float& v : b.data) v += 0.1f;  // MSE = 0.01
  CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-5));

  // Scaling both images and the peak leaves PSNR unchanged.
  Image a2 = a, b2 = b;
  for (float& v : a2.data) v *= 3.0f;
  for (float& v : b2.data) v *= 3.0f;
  CHECK(psnr(a2, b2, 3.0) == doctest::Approx(psnr(a, b, 1.0)).epsilon(1e-6));
}

TEST_CASE("psnr symmetry and errors") {
  Rng rng(21);
  Image a(8, 8), b(8, 8);
  for (size_t i = 0; i < a.size(); ++i) {
    a.data[i] = static_cast<float>(rng.uniform());
    b.data[i] = static_cast<float>(rng.uniform());
  }
  CHECK(psnr(a, b) == doctest::Approx(psnr(b, a)).epsilon(1e-12));
  Image c(4, 4);
  CHECK_THROWS_AS(psnr(a, c), ArgumentError);
  CHECK_THROWS_AS(psnr(a, b, 0.0), ArgumentError);
}

TEST_CASE("format_double round-trips through parse_double") {
  for (double v : {0.0, 1.0, -0.25, 3.14159265358979, 1e-300, 6.02214076e23}) {
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(std::isinf(parse_double("inf")));
  CHECK(parse_double("-inf") < 0);
  CHECK_THROWS_AS(parse_double("abc"), ArgumentError);
}

TEST_CASE("desk grid covers the documented cells") {
  const auto grid = desk_grid();
  CHECK(grid.size() == 10);
  CHECK(grid[0].lambda == 0.0);
  CHECK(grid[0].sigma == 0.0);
  CHECK(full_grid().size() == 36);
}

TEST_CASE("synthetic textures are deterministic and in range") {
  Rng r1(33), r2(33);
  const Image t1 = synth_texture(48, r1);
  const Image t2 = synth_texture(48, r2);
  CHECK(t1.data == t2.data);
  float lo = 1e9f, hi = -1e9f;
  for (float v : t1.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= 0.02f);
  CHECK(hi <= 0.95f);
  CHECK(hi - lo > 0.1f);  // actual structure, not a flat field

  Rng r3(34);
  const auto set = synth_dataset(3, 32, r3);
  CHECK(set.size() == 3);
  CHECK(set[0].data != set[1].data);
}

TEST_CASE("bench CSV round-trips losslessly") {
  std::vector<BenchRow> rows(2);
  rows[0].lambda = 50;
  rows[0].sigma = 10;
  rows[0].true_a = 0.02;
  rows[0].true_b = 0.0015340253748558246;
  rows[0].est_a = 0.0250001;
  rows[0].est_b = 0.00135;
  rows[0].psnr_noisy = std::numeric_limits<double>::infinity();
  rows[0].psnr_pseudo = 36.95;
  rows[0].psnr_uncalibrated = 37.05;
  rows[0].psnr_ground_truth_params = 37.25;
  rows[1].lambda = 0;
  rows[1].error = "cell failed; reason";

  const std::string csv = bench_csv(rows);
  const auto back = bench_rows_from_csv(csv);
  REQUIRE(back.size() == 2);
  CHECK(back[0].true_b == rows[0].true_b);
  CHECK(back[0].est_a == rows[0].est_a);
  CHECK(std::isinf(back[0].psnr_noisy));
  CHECK(back[0].psnr_pseudo == rows[0].psnr_pseudo);
  CHECK(back[1].error == rows[1].error);
  CHECK(bench_csv(back) == csv);
}

TEST_CASE("run_benchmark fills rows and flags the identity cell") {
  BenchConfig cfg;
  cfg.grid = {{0, 0}, {30, 30}};
  cfg.train_images = 3;
  cfg.test_images = 1;
  cfg.image_size = 24;
  cfg.train = tiny_train_config();
  cfg.seed = 5;
  cfg.jobs = 2;

  Rng tex(cfg.seed);
  const auto dataset = synth_dataset(4, cfg.image_size, tex);
  const auto rows = run_benchmark(dataset, cfg);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) CHECK(r.error.empty());

  CHECK(std::isinf(rows[0].psnr_noisy));  // noisy = clean at (0,0)
  CHECK(rows[1].psnr_noisy > 0);
  CHECK(std::isfinite(rows[1].psnr_pseudo));
  CHECK(rows[1].true_a == doctest::Approx(1.0 / 30.0));

  // Work queue must not change results.
  BenchConfig serial = cfg;
  serial.jobs = 1;
  const auto rows2 = run_benchmark(dataset, serial);
  CHECK(rows2[1].est_a == rows[1].est_a);
  CHECK(rows2[1].psnr_uncalibrated == rows[1].psnr_uncalibrated);
}

TEST_CASE("bench summary reports counts") {
  BenchConfig cfg;
  cfg.grid = {{10, 10}};
  cfg.test_images = 2;
  std::vector<BenchRow> rows(1);
  rows[0].lambda = 10;
  const auto j = bench_summary(rows, cfg);
  CHECK(j.at("cells").get<int>() == 1);
  CHECK(j.at("test_images_per_cell").get<int>() == 2);
  CHECK(j.at("failed_cells").get<int>() == 0);
}

TEST_CASE("regularization_sweep emits one row per lambda plus the uncalibrated row") {
  Rng tex(71);
  const auto dataset = synth_dataset(4, 24, tex);
  const TrainConfig cfg = tiny_train_config();
  const std::vector<double> lambdas{0.5, 2.0};
  const auto rows = regularization_sweep(dataset, 1, {30, 30}, lambdas, cfg, FitConfig{}, 9, 2);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].label == "uncalibrated");
  CHECK(rows[1].label == "regularized");
  CHECK(rows[1].lambda_reg == 0.5);
  CHECK(rows[2].lambda_reg == 2.0);
  for (const auto& r : rows) {
    CHECK(r.error.empty());
    CHECK(std::isfinite(r.psnr_db));
  }

  // Row i depends only on (seed, i): a single-lambda sweep reproduces the
  // same regularized training.
  const auto single = regularization_sweep(dataset, 1, {30, 30}, {0.5}, cfg, FitConfig{}, 9, 1);
  REQUIRE(single.size() == 2);
  CHECK(single[1].psnr_db == rows[1].psnr_db);
  CHECK(single[0].psnr_db == rows[0].psnr_db);

  const std::string csv = reg_csv(rows);
  CHECK(csv.find("label,lambda_reg,psnr_db,error\n") == 0);
  CHECK(csv.find("uncalibrated") != std::string::npos);
}
