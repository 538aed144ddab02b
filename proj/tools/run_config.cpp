#include "run_config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"
#include "pgdenoise/errors.hpp"

namespace pgd::cli {

namespace {

using nlohmann::json;

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::string& context) {
  if (!j.is_object()) throw ConfigError(context + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in " + context);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

void read_train(const json& j, TrainConfig& t) {
  require_keys(j, {"loss", "lambda_reg", "learn_noise_params", "noise_a", "noise_b", "lr",
                   "beta1", "beta2", "eps", "epochs", "batches_per_epoch", "batch_size",
                   "crop_size", "lr_halving_patience", "patch_radius", "hidden_sizes"},
               "train section");
  if (j.contains("loss")) t.loss_kind = loss_kind_from_string(j.at("loss").get<std::string>());
  read(j, "lambda_reg", t.lambda_reg);
  read(j, "learn_noise_params", t.learn_noise_params);
  read(j, "noise_a", t.noise_init.a);
  read(j, "noise_b", t.noise_init.b);
  read(j, "lr", t.optimizer.lr);
  read(j, "beta1", t.optimizer.beta1);
  read(j, "beta2", t.optimizer.beta2);
  read(j, "eps", t.optimizer.eps);
  read(j, "epochs", t.epochs);
  read(j, "batches_per_epoch", t.batches_per_epoch);
  read(j, "batch_size", t.batch_size);
  read(j, "crop_size", t.crop_size);
  read(j, "lr_halving_patience", t.lr_halving_patience);
  read(j, "patch_radius", t.patch_radius);
  read(j, "hidden_sizes", t.hidden_sizes);
}

void read_fit(const json& j, FitConfig& f) {
  require_keys(j, {"mode", "init_a", "init_b", "clip_low", "clip_high", "tol", "max_iter"},
               "fit section");
  if (j.contains("mode")) f.mode = fit_mode_from_string(j.at("mode").get<std::string>());
  read(j, "init_a", f.init.a);
  read(j, "init_b", f.init.b);
  read(j, "clip_low", f.clip_low_frac);
  read(j, "clip_high", f.clip_high_frac);
  read(j, "tol", f.tol);
  read(j, "max_iter", f.max_iter);
}

}  // namespace

RunConfig load_run_config(const std::string& path, const RunConfig& base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  require_keys(j, {"seed", "jobs", "train", "fit", "corrupt", "bench", "denoise", "eval"},
               "config root");

  RunConfig cfg = base;
  read(j, "seed", cfg.seed);
  read(j, "jobs", cfg.jobs);
  if (j.contains("train")) read_train(j.at("train"), cfg.train);
  if (j.contains("fit")) read_fit(j.at("fit"), cfg.fit);
  if (j.contains("corrupt")) {
    const json& c = j.at("corrupt");
    require_keys(c, {"lambda", "sigma", "a", "b"}, "corrupt section");
    if (c.contains("lambda")) cfg.corrupt_lambda = c.at("lambda").get<double>();
    if (c.contains("sigma")) cfg.corrupt_sigma = c.at("sigma").get<double>();
    if (c.contains("a")) cfg.corrupt_a = c.at("a").get<double>();
    if (c.contains("b")) cfg.corrupt_b = c.at("b").get<double>();
  }
  if (j.contains("bench")) {
    const json& b = j.at("bench");
    require_keys(b, {"grid", "train_images", "test_images", "image_size"}, "bench section");
    read(b, "grid", cfg.bench_grid);
    if (cfg.bench_grid != "desk" && cfg.bench_grid != "full")
      throw ConfigError("bench.grid must be 'desk' or 'full'");
    read(b, "train_images", cfg.bench_train_images);
    read(b, "test_images", cfg.bench_test_images);
    read(b, "image_size", cfg.bench_image_size);
  }
  if (j.contains("denoise")) {
    const json& d = j.at("denoise");
    require_keys(d, {"var_floor", "clamp_output"}, "denoise section");
    read(d, "var_floor", cfg.var_floor);
    read(d, "clamp_output", cfg.clamp_output);
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    require_keys(e, {"peak"}, "eval section");
    read(e, "peak", cfg.eval_peak);
  }
  return cfg;
}

NoiseParams corrupt_params(const RunConfig& config) {
  if (config.corrupt_a || config.corrupt_b) {
    return {config.corrupt_a.value_or(0.0), config.corrupt_b.value_or(0.0)};
  }
  SyntheticNoiseSpec spec;
  spec.lambda = config.corrupt_lambda.value_or(0.0);
  spec.sigma = config.corrupt_sigma.value_or(0.0);
  return spec_to_params(spec);
}

}  // namespace pgd::cli
