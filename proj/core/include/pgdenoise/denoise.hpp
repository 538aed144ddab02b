#pragma once

#include <string>

#include "pgdenoise/blindspot.hpp"
#include "pgdenoise/image.hpp"
#include "pgdenoise/noise_fit.hpp"
#include "pgdenoise/noise_model.hpp"

namespace pgd {

struct DenoiseReport {
  Image denoised;
  Image pseudo_clean;   // the per-pixel prior mean
  FitResult fitted;
  long floored_pixel_count = 0;   // pixels hit by the prior-variance floor
  long fallback_pixel_count = 0;  // pixels where a*mu+b < 0 fell back to mu
  bool params_supplied = false;   // true when (a, b) were given, not fitted
};

// Posterior mean under the Gaussian-approximation model:
// (y*sigma^2 + (a*mu+b)*mu) / (a*mu + b + sigma^2). Requires a*mu+b >= 0 and
// a positive denominator.
double posterior_mean(double y, double mu, double sigma2_prior, NoiseParams params);

// sigma^2 = max(floor, total_var - a*mu - b). The default floor 0.0001 is
// stated for [0,1]-scaled data; rescale it for float sources.
double recover_prior_variance(double total_var, double mu, NoiseParams params,
                              double floor = 1e-4);

// Four-step test-time procedure: predict (mu, sigma_hat^2), bootstrap-fit
// (a, b) against the pseudo-clean image, recover the prior variance, then
// take the posterior mean. Each image gets its own fitted parameters. Pixels
// where the fitted parameters make a*mu+b negative fall back to mu and are
// counted in the report.
DenoiseReport denoise_image(const BlindspotPredictor& model, const Image& y,
                            const FitConfig& fit_config, double var_floor = 1e-4);

// Same pipeline with the fit skipped and (a, b) supplied by the caller.
DenoiseReport denoise_with_known_params(const BlindspotPredictor& model, const Image& y,
                                        NoiseParams params, double var_floor = 1e-4);

// Posterior mean for a calibrated model: the variance head already predicts
// the prior variance, so no recovery step is needed. params defaults to the
// model's own (learned) noise parameters.
DenoiseReport denoise_calibrated(const BlindspotPredictor& model, const Image& y);

// Writes <prefix>.denoised.pfm, <prefix>.pseudo.pfm and <prefix>.fit.json.
void write_report(const DenoiseReport& report, const std::string& prefix);

}  // namespace pgd
