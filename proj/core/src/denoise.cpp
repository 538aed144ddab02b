#include "pgdenoise/denoise.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "pgdenoise/errors.hpp"

namespace pgd {

namespace {

// Steps iii-iv over a full prediction. In calibrated mode the variance map
// is used as the prior variance directly.
DenoiseReport assemble(const Image& y, const PriorPrediction& pred, NoiseParams params,
                       double var_floor, bool recover_variance) {
  DenoiseReport report;
  report.pseudo_clean = pred.mu;
  report.denoised = Image(y.width, y.height);
  for (size_t i = 0; i < y.size(); ++i) {
    const double mu = pred.mu.data[i];
    const double s = params.a * mu + params.b;
    double sigma2;
    if (recover_variance) {
      sigma2 = static_cast<double>(pred.var.data[i]) - s;
      if (sigma2 < var_floor) {
        sigma2 = var_floor;
        ++report.floored_pixel_count;
      }
    } else {
      sigma2 = pred.var.data[i];
    }
    double xhat;
    if (s < 0 || s + sigma2 <= 0) {
      xhat = mu;
      ++report.fallback_pixel_count;
    } else {
      xhat = (static_cast<double>(y.data[i]) * sigma2 + s * mu) / (s + sigma2);
    }
    report.denoised.data[i] = static_cast<float>(xhat);
  }
  return report;
}

}  // namespace

double posterior_mean(double y, double mu, double sigma2_prior, NoiseParams params) {
  const double s = params.a * mu + params.b;
  if (s < 0)
    throw DomainError("posterior_mean: noise variance a*mu+b = " + std::to_string(s) + " < 0");
  const double denom = s + sigma2_prior;
  if (denom <= 0)
    throw DomainError("posterior_mean: nonpositive total variance " + std::to_string(denom));
  return (y * sigma2_prior + s * mu) / denom;
}

double recover_prior_variance(double total_var, double mu, NoiseParams params, double floor) {
  return std::max(floor, total_var - params.a * mu - params.b);
}

DenoiseReport denoise_image(const BlindspotPredictor& model, const Image& y,
                            const FitConfig& fit_config, double var_floor) {
  const PriorPrediction pred = predict_image(model, y);
  if (!pred.uncalibrated)
    throw ArgumentError("denoise_image: model was not trained in uncalibrated mode; "
                        "use denoise_calibrated");
  const FitResult fit = fit_pg(y, pred.mu, fit_config);
  DenoiseReport report = assemble(y, pred, fit.params, var_floor, true);
  report.fitted = fit;
  return report;
}

DenoiseReport denoise_with_known_params(const BlindspotPredictor& model, const Image& y,
                                        NoiseParams params, double var_floor) {
  const PriorPrediction pred = predict_image(model, y);
  if (!pred.uncalibrated)
    throw ArgumentError("denoise_with_known_params: model was not trained in uncalibrated mode");
  DenoiseReport report = assemble(y, pred, params, var_floor, true);
  report.fitted.params = params;
  report.params_supplied = true;
  return report;
}

DenoiseReport denoise_calibrated(const BlindspotPredictor& model, const Image& y) {
  const PriorPrediction pred = predict_image(model, y);
  if (pred.uncalibrated)
    throw ArgumentError("denoise_calibrated: model was trained in uncalibrated mode; "
                        "use denoise_image");
  DenoiseReport report = assemble(y, pred, model.noise, 0.0, false);
  report.fitted.params = model.noise;
  report.params_supplied = true;
  return report;
}

void write_report(const DenoiseReport& report, const std::string& prefix) {
  save_image(report.denoised, prefix + ".denoised.pfm");
  save_image(report.pseudo_clean, prefix + ".pseudo.pfm");
  nlohmann::ordered_json j = to_json(report.fitted);
  j["params_source"] = report.params_supplied ? "supplied" : "bootstrap";
  j["floored_pixel_count"] = report.floored_pixel_count;
  j["fallback_pixel_count"] = report.fallback_pixel_count;
  const std::string path = prefix + ".fit.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open file for writing");
  out << j.dump(1, '\t') << '\n';
  if (!out) throw IoError(path, "write failed");
}

}  // namespace pgd
