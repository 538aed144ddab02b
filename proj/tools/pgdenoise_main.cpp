#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pgdenoise/denoise.hpp"
#include "pgdenoise/errors.hpp"
#include "pgdenoise/metrics.hpp"
#include "pgdenoise/num_format.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace pgd;
using pgd::cli::RunConfig;

namespace {

bool is_image_file(const fs::path& p) {
  return p.extension() == ".pfm" || p.extension() == ".pgm";
}

// Directories expand to their image files, sorted so runs are reproducible.
std::vector<std::string> expand_dataset_paths(const std::vector<std::string>& inputs) {
  std::vector<std::string> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<std::string> found;
      for (const auto& entry : fs::directory_iterator(in))
        if (entry.is_regular_file() && is_image_file(entry.path()))
          found.push_back(entry.path().string());
      std::sort(found.begin(), found.end());
      if (found.empty()) throw ArgumentError("no .pfm/.pgm files in directory " + in);
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(in);
    }
  }
  return out;
}

std::vector<Image> load_dataset(const std::vector<std::string>& inputs) {
  std::vector<Image> images;
  for (const auto& path : expand_dataset_paths(inputs)) images.push_back(load_image(path));
  return images;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open file for writing");
  out << text;
  if (!out) throw IoError(path, "write failed");
}

std::string strip_extension(const std::string& path) {
  fs::path p(path);
  p.replace_extension();
  return p.string();
}

std::string json_or_inf(double v) { return std::isinf(v) ? "inf" : format_double(v); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised Poisson-Gaussian image denoising toolkit"};
  app.require_subcommand(1);

  std::string config_path;

  // Resolves the effective config: defaults (or `base`), then the manifest
  // file, flags applied by each subcommand afterwards.
  auto resolve = [&](const RunConfig& base) {
    return config_path.empty() ? base : cli::load_run_config(config_path, base);
  };

  // ---- corrupt ----
  auto* c_cmd = app.add_subcommand("corrupt", "Add synthetic Poisson-Gaussian noise to an image");
  std::string c_in, c_out;
  double c_lambda = 0, c_sigma = 0, c_a = 0, c_b = 0;
  uint64_t c_seed = 0;
  c_cmd->add_option("input", c_in, "Clean input image (.pfm/.pgm)")->required();
  c_cmd->add_option("output", c_out, "Noisy output image")->required();
  c_cmd->add_option("--config", config_path, "JSON config manifest");
  auto* c_lambda_opt = c_cmd->add_option("--lambda", c_lambda, "Poisson level (a = 1/lambda)");
  auto* c_sigma_opt = c_cmd->add_option("--sigma", c_sigma, "Gaussian level on the 0-255 scale");
  auto* c_a_opt = c_cmd->add_option("--a", c_a, "Explicit Poisson gain a");
  auto* c_b_opt = c_cmd->add_option("--b", c_b, "Explicit Gaussian variance b");
  auto* c_seed_opt = c_cmd->add_option("--seed", c_seed, "RNG seed (default 0)");
  c_cmd->callback([&] {
    RunConfig rc = resolve({});
    if (*c_seed_opt) rc.seed = c_seed;
    if (*c_lambda_opt) rc.corrupt_lambda = c_lambda;
    if (*c_sigma_opt) rc.corrupt_sigma = c_sigma;
    if (*c_a_opt) rc.corrupt_a = c_a;
    if (*c_b_opt) rc.corrupt_b = c_b;
    const Image img = load_image(c_in);
    Rng rng = Rng(rc.seed).split(streams::kNoise);
    save_image(pg_corrupt(img, cli::corrupt_params(rc), rng), c_out);
  });

  // ---- train ----
  auto* t_cmd = app.add_subcommand("train", "Train a blindspot predictor on noisy images");
  std::vector<std::string> t_inputs;
  std::string t_out = "model.json", t_log;
  std::string t_loss;
  double t_lambda_reg = 0, t_lr = 0, t_noise_a = 0, t_noise_b = 0;
  bool t_learn_noise = false;
  int t_epochs = 0, t_bpe = 0, t_batch = 0, t_crop = 0, t_patience = 0, t_radius = 0;
  std::vector<int> t_hidden;
  uint64_t t_seed = 0;
  t_cmd->add_option("inputs", t_inputs, "Noisy images or directories")->required();
  t_cmd->add_option("--config", config_path, "JSON config manifest");
  t_cmd->add_option("--out", t_out, "Checkpoint output path (default model.json)");
  t_cmd->add_option("--log", t_log, "Training log CSV path");
  auto* t_loss_opt = t_cmd->add_option("--loss", t_loss,
      "Loss: uncalibrated, pg-marginal, pg-regularized, gaussian, poisson");
  auto* t_lreg_opt = t_cmd->add_option("--lambda-reg", t_lambda_reg, "Regularization weight");
  auto* t_learn_opt = t_cmd->add_flag("--learn-noise", t_learn_noise,
      "Learn global (a, b) along with the weights");
  auto* t_lr_opt = t_cmd->add_option("--lr", t_lr, "Adam learning rate (default 0.0003)");
  auto* t_epochs_opt = t_cmd->add_option("--epochs", t_epochs, "Epochs (default 300)");
  auto* t_bpe_opt = t_cmd->add_option("--batches-per-epoch", t_bpe, "Batches per epoch (default 50)");
  auto* t_batch_opt = t_cmd->add_option("--batch-size", t_batch, "Crops per batch (default 4)");
  auto* t_crop_opt = t_cmd->add_option("--crop-size", t_crop, "Training crop size (default 128)");
  auto* t_patience_opt = t_cmd->add_option("--patience", t_patience,
      "Epochs without validation improvement before halving the lr (default 10)");
  auto* t_radius_opt = t_cmd->add_option("--patch-radius", t_radius, "Receptive-field radius (default 4)");
  auto* t_hidden_opt = t_cmd->add_option("--hidden", t_hidden, "Hidden layer sizes (default 128,128)")
                           ->delimiter(',');
  auto* t_na_opt = t_cmd->add_option("--noise-a", t_noise_a, "Initial/fixed noise a (default 0.01)");
  auto* t_nb_opt = t_cmd->add_option("--noise-b", t_noise_b, "Initial/fixed noise b (default 0)");
  auto* t_seed_opt = t_cmd->add_option("--seed", t_seed, "RNG seed (default 0)");
  t_cmd->callback([&] {
    RunConfig rc = resolve({});
    if (*t_seed_opt) rc.seed = t_seed;
    TrainConfig& tc = rc.train;
    if (*t_loss_opt) tc.loss_kind = loss_kind_from_string(t_loss);
    if (*t_lreg_opt) tc.lambda_reg = t_lambda_reg;
    if (*t_learn_opt) tc.learn_noise_params = t_learn_noise;
    if (*t_lr_opt) tc.optimizer.lr = t_lr;
    if (*t_epochs_opt) tc.epochs = t_epochs;
    if (*t_bpe_opt) tc.batches_per_epoch = t_bpe;
    if (*t_batch_opt) tc.batch_size = t_batch;
    if (*t_crop_opt) tc.crop_size = t_crop;
    if (*t_patience_opt) tc.lr_halving_patience = t_patience;
    if (*t_radius_opt) tc.patch_radius = t_radius;
    if (*t_hidden_opt) tc.hidden_sizes = t_hidden;
    if (*t_na_opt) tc.noise_init.a = t_noise_a;
    if (*t_nb_opt) tc.noise_init.b = t_noise_b;
    tc.seed = rc.seed;
    const std::vector<Image> dataset = load_dataset(t_inputs);
    Rng rng(rc.seed);
    TrainLog log;
    const BlindspotPredictor model = train(dataset, tc, rng, &log);
    save_checkpoint(model, t_out, &tc);
    if (!t_log.empty()) write_text_file(t_log, log.csv());
  });

  // ---- fit-noise ----
  auto* f_cmd = app.add_subcommand("fit-noise",
      "Fit Poisson-Gaussian noise parameters to a noisy/pseudo-clean image pair");
  std::string f_noisy, f_clean, f_out;
  std::string f_mode;
  double f_a = 0, f_b = 0, f_clip_low = 0, f_clip_high = 0, f_tol = 0;
  int f_max_iter = 0;
  f_cmd->add_option("noisy", f_noisy, "Noisy image")->required();
  f_cmd->add_option("pseudo_clean", f_clean, "Pseudo-clean (or true clean) image")->required();
  f_cmd->add_option("--config", config_path, "JSON config manifest");
  f_cmd->add_option("--out", f_out, "Write the FitResult JSON here instead of stdout");
  auto* f_mode_opt = f_cmd->add_option("--mode", f_mode, "Fit mode: pg, gaussian, poisson");
  auto* f_a_opt = f_cmd->add_option("--a", f_a, "Initial a (default 0.01)");
  auto* f_b_opt = f_cmd->add_option("--b", f_b, "Initial b (default 0)");
  auto* f_cl_opt = f_cmd->add_option("--clip-low", f_clip_low, "Bottom dynamic-range clip fraction (default 0.02)");
  auto* f_ch_opt = f_cmd->add_option("--clip-high", f_clip_high, "Top dynamic-range clip fraction (default 0.03)");
  auto* f_tol_opt = f_cmd->add_option("--tol", f_tol, "Simplex spread tolerance (default 1e-8)");
  auto* f_mi_opt = f_cmd->add_option("--max-iter", f_max_iter, "Iteration cap (default 500)");
  f_cmd->callback([&] {
    RunConfig rc = resolve({});
    FitConfig& fc = rc.fit;
    if (*f_mode_opt) fc.mode = fit_mode_from_string(f_mode);
    if (*f_a_opt) fc.init.a = f_a;
    if (*f_b_opt) fc.init.b = f_b;
    if (*f_cl_opt) fc.clip_low_frac = f_clip_low;
    if (*f_ch_opt) fc.clip_high_frac = f_clip_high;
    if (*f_tol_opt) fc.tol = f_tol;
    if (*f_mi_opt) fc.max_iter = f_max_iter;
    const FitResult result = fit_pg(load_image(f_noisy), load_image(f_clean), fc);
    const std::string text = to_json(result).dump(1, '\t') + "\n";
    if (f_out.empty())
      std::fputs(text.c_str(), stdout);
    else
      write_text_file(f_out, text);
  });

  // ---- denoise ----
  auto* d_cmd = app.add_subcommand("denoise", "Denoise a noisy image with a trained checkpoint");
  std::string d_ckpt, d_noisy, d_prefix;
  std::string d_mode;
  double d_a = 0, d_b = 0, d_clip_low = 0, d_clip_high = 0, d_floor = 0;
  bool d_clamp = false;
  d_cmd->add_option("checkpoint", d_ckpt, "Trained model checkpoint")->required();
  d_cmd->add_option("noisy", d_noisy, "Noisy input image")->required();
  d_cmd->add_option("--config", config_path, "JSON config manifest");
  d_cmd->add_option("--out-prefix", d_prefix,
      "Output prefix (default: input path without extension); writes "
      "<prefix>.denoised.pfm, <prefix>.pseudo.pfm, <prefix>.fit.json");
  auto* d_a_opt = d_cmd->add_option("--a", d_a, "Skip the fit and use this known a");
  auto* d_b_opt = d_cmd->add_option("--b", d_b, "Skip the fit and use this known b");
  auto* d_mode_opt = d_cmd->add_option("--mode", d_mode, "Fit mode: pg, gaussian, poisson");
  auto* d_cl_opt = d_cmd->add_option("--clip-low", d_clip_low, "Bottom clip fraction (default 0.02)");
  auto* d_ch_opt = d_cmd->add_option("--clip-high", d_clip_high, "Top clip fraction (default 0.03)");
  auto* d_floor_opt = d_cmd->add_option("--var-floor", d_floor, "Prior variance floor (default 0.0001)");
  auto* d_clamp_opt = d_cmd->add_flag("--clamp-output", d_clamp,
      "Also export <prefix>.denoised.pgm (8-bit, clamped)");
  d_cmd->callback([&] {
    RunConfig rc = resolve({});
    if (*d_mode_opt) rc.fit.mode = fit_mode_from_string(d_mode);
    if (*d_cl_opt) rc.fit.clip_low_frac = d_clip_low;
    if (*d_ch_opt) rc.fit.clip_high_frac = d_clip_high;
    if (*d_floor_opt) rc.var_floor = d_floor;
    if (*d_clamp_opt) rc.clamp_output = d_clamp;
    const BlindspotPredictor model = load_checkpoint(d_ckpt);
    const Image y = load_image(d_noisy);
    const std::string prefix = d_prefix.empty() ? strip_extension(d_noisy) : d_prefix;
    DenoiseReport report;
    if (*d_a_opt || *d_b_opt) {
      report = denoise_with_known_params(model, y, {d_a, d_b}, rc.var_floor);
    } else if (model.trained_loss == LossKind::uncalibrated) {
      report = denoise_image(model, y, rc.fit, rc.var_floor);
    } else {
      report = denoise_calibrated(model, y);
    }
    write_report(report, prefix);
    if (rc.clamp_output) save_image(report.denoised, prefix + ".denoised.pgm");
  });

  // ---- eval ----
  auto* e_cmd = app.add_subcommand("eval", "PSNR (and optional noise-model NLL) between two images");
  std::string e_ref, e_test;
  double e_peak = 1.0, e_a = 0, e_b = 0, e_clip_low = 0.02, e_clip_high = 0.03;
  e_cmd->add_option("reference", e_ref, "Reference (clean or pseudo-clean) image")->required();
  e_cmd->add_option("test", e_test, "Test (noisy or denoised) image")->required();
  e_cmd->add_option("--config", config_path, "JSON config manifest");
  auto* e_peak_opt = e_cmd->add_option("--peak", e_peak, "PSNR peak value (default 1.0)");
  auto* e_a_opt = e_cmd->add_option("--a", e_a, "Report the masked NLL under noise params (a, b)");
  auto* e_b_opt = e_cmd->add_option("--b", e_b, "Gaussian variance for the NLL");
  e_cmd->add_option("--clip-low", e_clip_low, "Bottom clip fraction for the NLL mask");
  e_cmd->add_option("--clip-high", e_clip_high, "Top clip fraction for the NLL mask");
  e_cmd->callback([&] {
    RunConfig rc = resolve({});
    if (*e_peak_opt) rc.eval_peak = e_peak;
    const Image ref = load_image(e_ref);
    const Image test = load_image(e_test);
    nlohmann::ordered_json j;
    const double p = psnr(ref, test, rc.eval_peak);
    if (std::isinf(p))
      j["psnr_db"] = "inf";
    else
      j["psnr_db"] = p;
    if (*e_a_opt || *e_b_opt) {
      const auto mask = clip_mask(test, e_clip_low, e_clip_high);
      j["nll"] = pg_nll(test, ref, {e_a, e_b}, mask);
    }
    std::fputs((j.dump() + "\n").c_str(), stdout);
  });

  // ---- bench ----
  auto* b_cmd = app.add_subcommand("bench", "Run the synthetic noise-grid benchmark");
  std::vector<std::string> b_inputs;
  std::string b_csv = "bench.csv", b_json;
  bool b_full = false;
  int b_jobs = 0, b_train_images = 0, b_test_images = 0, b_size = 0;
  uint64_t b_seed = 0;
  b_cmd->add_option("dataset", b_inputs, "Clean images or directories (default: bundled textures)");
  b_cmd->add_option("--config", config_path, "JSON config manifest");
  b_cmd->add_option("--out-csv", b_csv, "Benchmark CSV output (default bench.csv)");
  b_cmd->add_option("--out-json", b_json, "Optional JSON summary output");
  b_cmd->add_flag("--full", b_full, "Run the full {0..50}^2 grid instead of the desk grid");
  auto* b_jobs_opt = b_cmd->add_option("--jobs", b_jobs, "Parallel cell jobs (default 1)");
  auto* b_seed_opt = b_cmd->add_option("--seed", b_seed, "Master seed (default 1)");
  auto* b_ti_opt = b_cmd->add_option("--train-images", b_train_images, "Clean training images per cell (default 16)");
  auto* b_te_opt = b_cmd->add_option("--test-images", b_test_images, "Clean test images per cell (default 2)");
  auto* b_sz_opt = b_cmd->add_option("--image-size", b_size, "Generated texture size (default 64)");
  b_cmd->callback([&] {
    RunConfig base;
    base.seed = 1;
    base.train = desk_train_config();
    RunConfig rc = resolve(base);
    if (*b_seed_opt) rc.seed = b_seed;
    if (*b_jobs_opt) rc.jobs = b_jobs;
    if (b_full) rc.bench_grid = "full";
    if (*b_ti_opt) rc.bench_train_images = b_train_images;
    if (*b_te_opt) rc.bench_test_images = b_test_images;
    if (*b_sz_opt) rc.bench_image_size = b_size;

    BenchConfig bc;
    bc.grid = rc.bench_grid == "full" ? full_grid() : desk_grid();
    bc.train_images = rc.bench_train_images;
    bc.test_images = rc.bench_test_images;
    bc.image_size = rc.bench_image_size;
    bc.train = rc.train;
    bc.fit = rc.fit;
    bc.seed = rc.seed;
    bc.jobs = rc.jobs;

    std::vector<Image> dataset;
    if (b_inputs.empty()) {
      Rng tex_rng = Rng(bc.seed).split(streams::kTexture);
      dataset = synth_dataset(bc.train_images + bc.test_images, bc.image_size, tex_rng);
    } else {
      dataset = load_dataset(b_inputs);
    }
    const auto rows = run_benchmark(dataset, bc);
    write_text_file(b_csv, bench_csv(rows));
    if (!b_json.empty()) write_text_file(b_json, bench_summary(rows, bc).dump(1, '\t') + "\n");
  });

  // ---- reg-sweep ----
  auto* r_cmd = app.add_subcommand("reg-sweep",
      "Compare uncalibrated training against regularized training over a lambda sweep");
  std::vector<std::string> r_inputs;
  std::vector<double> r_lambdas{0.1, 1.0, 10.0};
  std::string r_csv = "regsweep.csv";
  double r_lambda = 30, r_sigma = 30;
  int r_jobs = 0, r_test_images = 0, r_size = 0, r_train_images = 0;
  uint64_t r_seed = 0;
  r_cmd->add_option("dataset", r_inputs, "Clean images or directories (default: bundled textures)");
  r_cmd->add_option("--config", config_path, "JSON config manifest");
  r_cmd->add_option("--lambdas", r_lambdas, "Regularization weights (default 0.1,1,10)")
      ->delimiter(',');
  r_cmd->add_option("--out-csv", r_csv, "Sweep CSV output (default regsweep.csv)");
  r_cmd->add_option("--lambda", r_lambda, "Poisson level of the corruption (default 30)");
  r_cmd->add_option("--sigma", r_sigma, "Gaussian level of the corruption (default 30)");
  auto* r_jobs_opt = r_cmd->add_option("--jobs", r_jobs, "Parallel training jobs (default 1)");
  auto* r_seed_opt = r_cmd->add_option("--seed", r_seed, "Master seed (default 1)");
  auto* r_ti_opt = r_cmd->add_option("--train-images", r_train_images, "Clean training images (default 16)");
  auto* r_te_opt = r_cmd->add_option("--test-images", r_test_images, "Clean test images (default 2)");
  auto* r_sz_opt = r_cmd->add_option("--image-size", r_size, "Generated texture size (default 64)");
  r_cmd->callback([&] {
    RunConfig base;
    base.seed = 1;
    base.train = desk_train_config();
    RunConfig rc = resolve(base);
    if (*r_seed_opt) rc.seed = r_seed;
    if (*r_jobs_opt) rc.jobs = r_jobs;
    if (*r_ti_opt) rc.bench_train_images = r_train_images;
    if (*r_te_opt) rc.bench_test_images = r_test_images;
    if (*r_sz_opt) rc.bench_image_size = r_size;

    std::vector<Image> dataset;
    if (r_inputs.empty()) {
      Rng tex_rng = Rng(rc.seed).split(streams::kTexture);
      dataset = synth_dataset(rc.bench_train_images + rc.bench_test_images,
                              rc.bench_image_size, tex_rng);
    } else {
      dataset = load_dataset(r_inputs);
    }
    const auto rows = regularization_sweep(dataset, rc.bench_test_images, {r_lambda, r_sigma},
                                           r_lambdas, rc.train, rc.fit, rc.seed, rc.jobs);
    write_text_file(r_csv, reg_csv(rows));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.category().c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
