#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "pgdenoise/metrics.hpp"
#include "pgdenoise/noise_fit.hpp"

namespace pgd::cli {

// Batch-run parameters, loadable from a JSON manifest (strict: unknown keys
// are rejected) and overridable by command-line flags. Defaults mirror the
// library defaults.
struct RunConfig {
  uint64_t seed = 0;
  int jobs = 1;

  TrainConfig train;
  FitConfig fit;

  // corrupt: explicit (a, b) win over (lambda, sigma) when present.
  std::optional<double> corrupt_lambda;
  std::optional<double> corrupt_sigma;
  std::optional<double> corrupt_a;
  std::optional<double> corrupt_b;

  std::string bench_grid = "desk";  // "desk" or "full"
  int bench_train_images = 16;
  int bench_test_images = 2;
  int bench_image_size = 64;

  double var_floor = 1e-4;
  bool clamp_output = false;
  double eval_peak = 1.0;
};

// Parses and validates a manifest file. Throws ConfigError on unknown keys,
// wrong types, or unreadable files.
RunConfig load_run_config(const std::string& path, const RunConfig& base);

NoiseParams corrupt_params(const RunConfig& config);

}  // namespace pgd::cli
