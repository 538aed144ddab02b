#include "pgdenoise/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "pgdenoise/denoise.hpp"
#include "pgdenoise/errors.hpp"
#include "pgdenoise/num_format.hpp"

namespace pgd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// Substream ids for the per-cell generators.
constexpr uint64_t kCellNoise = 11;
constexpr uint64_t kCellTrain = 12;
}  // namespace

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ArgumentError("malformed number '" + std::string(s) + "'");
  return v;
}

double psnr(const Image& reference, const Image& test, double peak) {
  if (!reference.same_shape(test)) throw ArgumentError("psnr: image shapes differ");
  if (peak <= 0) throw ArgumentError("psnr: peak must be positive");
  if (reference.size() == 0) throw ArgumentError("psnr: empty image");
  double mse = 0.0;
  for (size_t i = 0; i < reference.size(); ++i) {
    const double d = static_cast<double>(reference.data[i]) - test.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(reference.size());
  if (mse == 0) return kInf;
  return 10.0 * std::log10(peak * peak / mse);
}

std::vector<SyntheticNoiseSpec> desk_grid() {
  std::vector<SyntheticNoiseSpec> grid{{0, 0}};
  for (double lambda : {10.0, 30.0, 50.0})
    for (double sigma : {10.0, 30.0, 50.0}) grid.push_back({lambda, sigma});
  return grid;
}

std::vector<SyntheticNoiseSpec> full_grid() {
  std::vector<SyntheticNoiseSpec> grid;
  for (double lambda : {0.0, 10.0, 20.0, 30.0, 40.0, 50.0})
    for (double sigma : {0.0, 10.0, 20.0, 30.0, 40.0, 50.0}) grid.push_back({lambda, sigma});
  return grid;
}

TrainConfig desk_train_config() {
  TrainConfig cfg;
  cfg.loss_kind = LossKind::uncalibrated;
  cfg.optimizer.lr = 3e-4;
  cfg.epochs = 300;
  cfg.batches_per_epoch = 30;
  cfg.batch_size = 4;
  cfg.crop_size = 32;
  cfg.lr_halving_patience = 10;
  cfg.patch_radius = 3;
  cfg.hidden_sizes = {32, 32};
  return cfg;
}

BenchConfig desk_bench_config(uint64_t seed, int jobs) {
  BenchConfig cfg;
  cfg.grid = desk_grid();
  cfg.train = desk_train_config();
  cfg.seed = seed;
  cfg.jobs = jobs;
  return cfg;
}

Image synth_texture(int size, Rng& rng) {
  if (size < 8) throw ArgumentError("synth_texture: size must be >= 8");
  Image img(size, size, 0.0f);
  std::vector<double> field(img.size(), 0.0);

  const int n_blobs = 6 + static_cast<int>(rng.below(6));
  for (int b = 0; b < n_blobs; ++b) {
    const double cx = rng.uniform(0.0, size);
    const double cy = rng.uniform(0.0, size);
    const double sx = rng.uniform(3.5, 7.5);
    const double sy = rng.uniform(3.5, 7.5);
    const double amp = rng.uniform(0.15, 0.5);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double dx = (x - cx) / sx, dy = (y - cy) / sy;
        field[static_cast<size_t>(y) * size + x] += amp * std::exp(-0.5 * (dx * dx + dy * dy));
      }
    }
  }

  // Filaments: smooth random walks stamped with a Gaussian cross-section,
  // max-combined so crossings do not bloom.
  std::vector<double> fil(img.size(), 0.0);
  const int n_fil = 2 + static_cast<int>(rng.below(3));
  for (int f = 0; f < n_fil; ++f) {
    double x = rng.uniform(0.0, size);
    double y = rng.uniform(0.0, size);
    double heading = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    const double amp = rng.uniform(0.2, 0.45);
    const double width = rng.uniform(1.3, 2.2);
    const int reach = static_cast<int>(std::ceil(3.0 * width));
    for (int step = 0; step < 2 * size; ++step) {
      heading += 0.25 * (rng.uniform() - 0.5);
      x += std::cos(heading);
      y += std::sin(heading);
      if (x < 1 || x > size - 2 || y < 1 || y > size - 2) break;
      const int ix = static_cast<int>(x), iy = static_cast<int>(y);
      for (int dy = -reach; dy <= reach; ++dy) {
        for (int dx = -reach; dx <= reach; ++dx) {
          const int px = ix + dx, py = iy + dy;
          if (px < 0 || px >= size || py < 0 || py >= size) continue;
          const double ddx = px - x, ddy = py - y;
          const double v = amp * std::exp(-0.5 * (ddx * ddx + ddy * ddy) / (width * width));
          auto& cell = fil[static_cast<size_t>(py) * size + px];
          cell = std::max(cell, v);
        }
      }
    }
  }

  for (size_t i = 0; i < img.size(); ++i) {
    const double v = 0.06 + field[i] + fil[i];
    img.data[i] = static_cast<float>(std::clamp(v, 0.02, 0.95));
  }
  return img;
}

std::vector<Image> synth_dataset(int count, int size, Rng& rng) {
  std::vector<Image> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng sub = rng.split(static_cast<uint64_t>(i));
    out.push_back(synth_texture(size, sub));
  }
  return out;
}

namespace {

BenchRow run_cell(const std::vector<Image>& dataset, const BenchConfig& config,
                  size_t cell_index) {
  const SyntheticNoiseSpec spec = config.grid[cell_index];
  const NoiseParams truth = spec_to_params(spec);
  BenchRow row;
  row.lambda = spec.lambda;
  row.sigma = spec.sigma;
  row.true_a = truth.a;
  row.true_b = truth.b;
  try {
    const Rng cell = Rng(config.seed).split(cell_index + 1);
    Rng noise_rng = cell.split(kCellNoise);
    Rng train_rng = cell.split(kCellTrain);

    std::vector<Image> noisy_train;
    noisy_train.reserve(config.train_images);
    for (int i = 0; i < config.train_images; ++i)
      noisy_train.push_back(pg_corrupt(dataset[i], truth, noise_rng));

    TrainConfig tc = config.train;
    tc.loss_kind = LossKind::uncalibrated;
    tc.seed = cell.seed();
    const BlindspotPredictor model = train(noisy_train, tc, train_rng);

    double est_a = 0, est_b = 0;
    double p_noisy = 0, p_pseudo = 0, p_uncal = 0, p_gt = 0;
    for (int i = 0; i < config.test_images; ++i) {
      const Image& clean = dataset[config.train_images + i];
      const Image y = pg_corrupt(clean, truth, noise_rng);
      const DenoiseReport boot = denoise_image(model, y, config.fit);
      const DenoiseReport gt = denoise_with_known_params(model, y, truth);
      est_a += boot.fitted.params.a;
      est_b += boot.fitted.params.b;
      p_noisy += psnr(clean, y);
      p_pseudo += psnr(clean, boot.pseudo_clean);
      p_uncal += psnr(clean, boot.denoised);
      p_gt += psnr(clean, gt.denoised);
    }
    const double inv = 1.0 / config.test_images;
    row.est_a = est_a * inv;
    row.est_b = est_b * inv;
    row.psnr_noisy = p_noisy * inv;
    row.psnr_pseudo = p_pseudo * inv;
    row.psnr_uncalibrated = p_uncal * inv;
    row.psnr_ground_truth_params = p_gt * inv;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

std::string sanitize_csv_field(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

}  // namespace

std::vector<BenchRow> run_benchmark(const std::vector<Image>& dataset,
                                    const BenchConfig& config) {
  if (config.grid.empty()) throw ArgumentError("run_benchmark: empty grid");
  if (config.train_images < 1 || config.test_images < 1)
    throw ArgumentError("run_benchmark: need at least one train and one test image");
  if (dataset.size() < static_cast<size_t>(config.train_images + config.test_images))
    throw ArgumentError("run_benchmark: dataset smaller than train_images + test_images");

  std::vector<BenchRow> rows(config.grid.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= config.grid.size()) break;
      rows[i] = run_cell(dataset, config, i);
    }
  };
  const int jobs = std::max(1, config.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out =
      "lambda,sigma,true_a,true_b,est_a,est_b,psnr_noisy,psnr_pseudo,"
      "psnr_uncalibrated,psnr_ground_truth_params,error\n";
  for (const auto& r : rows) {
    out += format_double(r.lambda) + ',' + format_double(r.sigma) + ',' +
           format_double(r.true_a) + ',' + format_double(r.true_b) + ',' +
           format_double(r.est_a) + ',' + format_double(r.est_b) + ',' +
           format_double(r.psnr_noisy) + ',' + format_double(r.psnr_pseudo) + ',' +
           format_double(r.psnr_uncalibrated) + ',' +
           format_double(r.psnr_ground_truth_params) + ',' + sanitize_csv_field(r.error) +
           '\n';
  }
  return out;
}

std::vector<BenchRow> bench_rows_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError("bench CSV: missing header");
  std::vector<BenchRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() != 11) throw ArgumentError("bench CSV: bad row '" + line + "'");
    BenchRow r;
    r.lambda = parse_double(fields[0]);
    r.sigma = parse_double(fields[1]);
    r.true_a = parse_double(fields[2]);
    r.true_b = parse_double(fields[3]);
    r.est_a = parse_double(fields[4]);
    r.est_b = parse_double(fields[5]);
    r.psnr_noisy = parse_double(fields[6]);
    r.psnr_pseudo = parse_double(fields[7]);
    r.psnr_uncalibrated = parse_double(fields[8]);
    r.psnr_ground_truth_params = parse_double(fields[9]);
    r.error = fields[10];
    rows.push_back(std::move(r));
  }
  return rows;
}

nlohmann::ordered_json bench_summary(const std::vector<BenchRow>& rows,
                                     const BenchConfig& config) {
  nlohmann::ordered_json j;
  j["seed"] = config.seed;
  j["cells"] = rows.size();
  j["train_images_per_cell"] = config.train_images;
  j["test_images_per_cell"] = config.test_images;
  j["image_size"] = config.image_size;
  size_t failed = 0;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json c;
    c["lambda"] = r.lambda;
    c["sigma"] = r.sigma;
    c["true_a"] = r.true_a;
    c["true_b"] = r.true_b;
    c["est_a"] = r.est_a;
    c["est_b"] = r.est_b;
    c["psnr_noisy"] = format_double(r.psnr_noisy);
    c["psnr_pseudo"] = format_double(r.psnr_pseudo);
    c["psnr_uncalibrated"] = format_double(r.psnr_uncalibrated);
    c["psnr_ground_truth_params"] = format_double(r.psnr_ground_truth_params);
    if (!r.error.empty()) {
      c["error"] = r.error;
      ++failed;
    }
    cells.push_back(std::move(c));
  }
  j["failed_cells"] = failed;
  j["results"] = std::move(cells);
  return j;
}

std::vector<RegRow> regularization_sweep(const std::vector<Image>& dataset,
                                         int test_images, SyntheticNoiseSpec level,
                                         const std::vector<double>& lambdas,
                                         const TrainConfig& base_config,
                                         const FitConfig& fit_config, uint64_t seed,
                                         int jobs) {
  if (lambdas.empty()) throw ArgumentError("regularization_sweep: empty lambda list");
  if (test_images < 1 || dataset.size() <= static_cast<size_t>(test_images))
    throw ArgumentError("regularization_sweep: need train and test images");
  const size_t n_train = dataset.size() - test_images;
  const NoiseParams truth = spec_to_params(level);

  // All rows share one corrupted dataset so the comparison isolates the loss.
  Rng noise_rng = Rng(seed).split(kCellNoise);
  std::vector<Image> noisy_train, noisy_test;
  for (size_t i = 0; i < n_train; ++i)
    noisy_train.push_back(pg_corrupt(dataset[i], truth, noise_rng));
  for (size_t i = 0; i < static_cast<size_t>(test_images); ++i)
    noisy_test.push_back(pg_corrupt(dataset[n_train + i], truth, noise_rng));

  std::vector<RegRow> rows(lambdas.size() + 1);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= rows.size()) break;
      RegRow& row = rows[i];
      try {
        TrainConfig tc = base_config;
        Rng train_rng = Rng(seed).split(i);
        if (i == 0) {
          row.label = "uncalibrated";
          row.lambda_reg = 0.0;
          tc.loss_kind = LossKind::uncalibrated;
          tc.learn_noise_params = false;
        } else {
          row.label = "regularized";
          row.lambda_reg = lambdas[i - 1];
          tc.loss_kind = LossKind::pg_regularized;
          tc.lambda_reg = lambdas[i - 1];
          tc.learn_noise_params = true;
        }
        tc.seed = train_rng.seed();
        const BlindspotPredictor model = train(noisy_train, tc, train_rng);
        double sum = 0.0;
        for (size_t k = 0; k < noisy_test.size(); ++k) {
          const DenoiseReport rep = i == 0 ? denoise_image(model, noisy_test[k], fit_config)
                                           : denoise_calibrated(model, noisy_test[k]);
          sum += psnr(dataset[n_train + k], rep.denoised);
        }
        row.psnr_db = sum / static_cast<double>(noisy_test.size());
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };
  const int nj = std::max(1, jobs);
  if (nj == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < nj; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return rows;
}

std::string reg_csv(const std::vector<RegRow>& rows) {
  std::string out = "label,lambda_reg,psnr_db,error\n";
  for (const auto& r : rows)
    out += r.label + ',' + format_double(r.lambda_reg) + ',' + format_double(r.psnr_db) +
           ',' + sanitize_csv_field(r.error) + '\n';
  return out;
}

}  // namespace pgd
