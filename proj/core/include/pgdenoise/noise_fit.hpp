#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pgdenoise/image.hpp"
#include "pgdenoise/noise_model.hpp"

namespace pgd {

enum class FitMode { poisson_gaussian, gaussian_only, poisson_only };

std::string to_string(FitMode mode);
FitMode fit_mode_from_string(const std::string& s);

struct FitConfig {
  NoiseParams init{0.01, 0.0};
  FitMode mode = FitMode::poisson_gaussian;
  // Pixels in the bottom clip_low_frac / top clip_high_frac of the noisy
  // image's dynamic range (max - min) are excluded from the fit.
  double clip_low_frac = 0.02;
  double clip_high_frac = 0.03;
  double tol = 1e-8;
  int max_iter = 500;
};

struct FitResult {
  NoiseParams params;
  double final_nll = 0.0;
  int iterations = 0;
  bool converged = false;
  long included_pixels = 0;
};

// One byte per pixel, nonzero = included in the fit. Throws
// DegenerateMaskError for a constant image with nonzero fractions, or when
// every pixel ends up excluded.
std::vector<uint8_t> clip_mask(const Image& y, double clip_low_frac, double clip_high_frac);

// Average over included pixels of (y-x)^2/(a*x+b) + log(a*x+b). Returns
// +infinity (not an exception) when any included pixel has a*x + b <= 0, so
// the simplex can reject infeasible parameter points.
double pg_nll(const Image& y, const Image& x, NoiseParams params,
              const std::vector<uint8_t>& mask);

struct SimplexResult {
  std::vector<double> point;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Downhill simplex with reflection 1.0, expansion 2.0, contraction 0.5,
// shrink 0.5. Converged when the objective spread across the simplex drops
// below tol. The objective may return +infinity for infeasible points; init
// itself must be feasible.
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& objective,
                          std::vector<double> init, double tol, int max_iter);

// Fits (a, b) to noisy y against pseudo-clean (or true clean) x by composing
// clip_mask + pg_nll + nelder_mead. gaussian_only pins a = 0, poisson_only
// pins b = 0; those modes run a 1-D simplex over the free parameter.
FitResult fit_pg(const Image& y, const Image& x_pseudo, const FitConfig& config);

nlohmann::ordered_json to_json(const FitResult& result);
FitResult fit_result_from_json(const nlohmann::json& j);

}  // namespace pgd
