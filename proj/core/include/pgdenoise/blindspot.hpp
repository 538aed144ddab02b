#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pgdenoise/image.hpp"
#include "pgdenoise/noise_model.hpp"
#include "pgdenoise/rng.hpp"

namespace pgd {

enum class LossKind { uncalibrated, pg_marginal, gaussian, poisson, pg_regularized };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& s);

// Masked-patch regressor: a small fully-connected network over the
// (2r+1)^2 - 1 neighborhood pixels of a target pixel, center excluded by
// construction, with tanh hidden layers and two linear heads (mean and
// log-variance). The log-variance parameterization keeps the predicted
// variance positive without clamping.
struct BlindspotPredictor {
  int patch_radius = 4;
  std::vector<int> hidden_sizes{128, 128};
  std::vector<double> weights;

  // Loss the model was trained with, and its global noise parameters
  // (learned during training for the pg losses, fixed otherwise).
  LossKind trained_loss = LossKind::uncalibrated;
  NoiseParams noise;

  int input_dim() const {
    const int side = 2 * patch_radius + 1;
    return side * side - 1;
  }
  int param_count() const;
};

struct Prediction {
  double mu = 0.0;
  double log_var = 0.0;
};

// Per-pixel prior maps. In uncalibrated mode var holds the total predictive
// uncertainty sigma_hat^2; in calibrated mode it is the prior variance
// sigma^2 directly.
struct PriorPrediction {
  Image mu;
  Image var;
  bool uncalibrated = true;
};

// Deterministic forward pass over one gathered patch (center not present in
// the vector). patch.size() must equal model.input_dim().
Prediction forward(const BlindspotPredictor& model, std::span<const double> patch);

// Gathers the masked neighborhood of (x, y) with reflection padding. A
// reflected slot that would resolve to the center pixel itself reads as 0 so
// the blindspot stays structural at image borders.
void gather_patch(const Image& img, int x, int y, int patch_radius, std::span<double> out);

// Runs forward at every pixel; var = exp(log_var).
PriorPrediction predict_image(const BlindspotPredictor& model, const Image& y);

// Per-pixel losses. All take the raw log-variance head output.
double loss_uncalibrated(double y, double mu, double log_var);
// (y-mu)^2/(a*mu+b+sigma^2) + log(a*mu+b+sigma^2); +inf when the total
// variance is not positive.
double loss_pg_marginal(double y, double mu, double log_var_prior, double a, double b);
double loss_gaussian(double y, double mu, double log_var_prior, double noise_var);
double loss_poisson(double y, double mu, double log_var_prior, double a);
// Regularizer contribution per pixel: lambda * sigma, sigma = exp(log_var/2).
double loss_pg_regularizer(double log_var_prior, double lambda_reg);

struct TrainSample {
  std::vector<double> patch;
  double y = 0.0;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  LossKind loss_kind = LossKind::uncalibrated;
  double lambda_reg = 0.0;
  // When set, the global (a, b) are optimized along with the weights for the
  // pg losses; otherwise noise_init is used as fixed values.
  bool learn_noise_params = false;
  NoiseParams noise_init{0.01, 0.0};
  AdamConfig optimizer;
  int epochs = 300;
  int batches_per_epoch = 50;
  int batch_size = 4;
  int crop_size = 128;
  int lr_halving_patience = 10;
  uint64_t seed = 0;
  int patch_radius = 4;
  std::vector<int> hidden_sizes{128, 128};
};

// Gradient of the mean batch loss with respect to all weights, with d(a),
// d(b) appended when learn_noise is set. mean_loss receives the batch loss;
// when a sample is infeasible (total variance <= 0) the loss is +inf and the
// gradient is not meaningful.
std::vector<double> backward(const BlindspotPredictor& model,
                             const std::vector<TrainSample>& batch, LossKind kind,
                             double lambda_reg, bool learn_noise, double* mean_loss);

// Mean per-pixel loss of the model over a whole image (reflection-padded
// patches), using model.noise for the pg losses.
double mean_image_loss(const BlindspotPredictor& model, const Image& y, LossKind kind,
                       double lambda_reg);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::string csv() const;  // header epoch,train_loss,val_loss,lr
};

// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases.
BlindspotPredictor init_predictor(const TrainConfig& config, Rng& rng);

// Adam over random augmented crops with a held-out validation split (last
// 10% of the dataset, at least one image) and plateau-based learning-rate
// halving. Deterministic given the rng. Throws TrainDivergedError with a
// diagnostic dump if the loss turns non-finite.
BlindspotPredictor train(const std::vector<Image>& dataset, const TrainConfig& config,
                         Rng& rng, TrainLog* log = nullptr);

// Versioned JSON checkpoint: patch_radius, hidden_sizes, loss kind, noise
// params, config hash, weights.
void save_checkpoint(const BlindspotPredictor& model, const std::string& path,
                     const TrainConfig* config = nullptr);
BlindspotPredictor load_checkpoint(const std::string& path);

}  // namespace pgd
