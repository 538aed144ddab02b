#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "pgdenoise/blindspot.hpp"
#include "pgdenoise/image.hpp"
#include "pgdenoise/noise_fit.hpp"
#include "pgdenoise/noise_model.hpp"

namespace pgd {

// 10*log10(peak^2 / MSE); +infinity for identical images.
double psnr(const Image& reference, const Image& test, double peak = 1.0);

// One synthetic-grid cell: noise levels, true and bootstrap-fitted
// parameters, and the PSNR column of each method variant (dB, averaged over
// the test images). error is nonempty when the cell failed.
struct BenchRow {
  double lambda = 0.0;
  double sigma = 0.0;
  double true_a = 0.0;
  double true_b = 0.0;
  double est_a = 0.0;
  double est_b = 0.0;
  double psnr_noisy = 0.0;
  double psnr_pseudo = 0.0;
  double psnr_uncalibrated = 0.0;
  double psnr_ground_truth_params = 0.0;
  std::string error;
};

struct BenchConfig {
  std::vector<SyntheticNoiseSpec> grid;
  int train_images = 16;
  int test_images = 2;
  int image_size = 64;
  TrainConfig train;
  FitConfig fit;
  uint64_t seed = 1;
  int jobs = 1;
};

// {10,30,50} x {10,30,50} plus the identity cell (0,0).
std::vector<SyntheticNoiseSpec> desk_grid();
// The full {0,10,20,30,40,50}^2 grid.
std::vector<SyntheticNoiseSpec> full_grid();

// Training defaults sized so a desk-grid cell trains in well under a minute.
TrainConfig desk_train_config();
BenchConfig desk_bench_config(uint64_t seed = 1, int jobs = 1);

// Procedural fluorescence-like texture: dark background with smooth blobs
// and filaments, values in [0.02, 0.95]. Deterministic given the rng.
Image synth_texture(int size, Rng& rng);
std::vector<Image> synth_dataset(int count, int size, Rng& rng);

// Per grid cell: corrupt the dataset, train one uncalibrated model, denoise
// the test split via the bootstrap fit and via the true parameters, emit a
// BenchRow. dataset must hold train_images + test_images clean images; the
// test split is the tail. Cells run on a work queue with jobs threads;
// per-cell seeds derive from config.seed, so results are independent of the
// partitioning. A failed cell records its error and the run continues.
std::vector<BenchRow> run_benchmark(const std::vector<Image>& dataset,
                                    const BenchConfig& config);

std::string bench_csv(const std::vector<BenchRow>& rows);
std::vector<BenchRow> bench_rows_from_csv(const std::string& text);
nlohmann::ordered_json bench_summary(const std::vector<BenchRow>& rows,
                                     const BenchConfig& config);

struct RegRow {
  std::string label;       // "uncalibrated" or "regularized"
  double lambda_reg = 0.0;
  double psnr_db = 0.0;
  std::string error;
};

// Trains one uncalibrated model plus one pg-regularized model per lambda on
// the same corrupted dataset and reports the test-split PSNR of each.
// Row i trains with Rng(seed).split(i): row 0 is the uncalibrated model,
// row i >= 1 the regularized model for lambdas[i-1].
std::vector<RegRow> regularization_sweep(const std::vector<Image>& dataset,
                                         int test_images, SyntheticNoiseSpec level,
                                         const std::vector<double>& lambdas,
                                         const TrainConfig& base_config,
                                         const FitConfig& fit_config, uint64_t seed,
                                         int jobs = 1);

std::string reg_csv(const std::vector<RegRow>& rows);

}  // namespace pgd
