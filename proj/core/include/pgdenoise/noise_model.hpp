#pragma once

#include "pgdenoise/image.hpp"
#include "pgdenoise/rng.hpp"

namespace pgd {

// Poisson-Gaussian parameters: y = a * Poisson(x / a) + N(0, b).
// a is the gain-like scaling factor, b the Gaussian variance component.
// Fitted b may be negative (pedestal); synthesis requires a >= 0, b >= 0.
struct NoiseParams {
  double a = 0.0;
  double b = 0.0;
};

// Synthetic corruption levels: Poisson level lambda (0 disables Poisson) and
// Gaussian level sigma on the 0..255 scale (0 disables Gaussian).
struct SyntheticNoiseSpec {
  double lambda = 0.0;
  double sigma = 0.0;
};

// a = 1/lambda (0 when lambda = 0), b = (sigma/255)^2.
NoiseParams spec_to_params(SyntheticNoiseSpec spec);

// Noise variance at clean value x under the Gaussian approximation: a*x + b.
// Throws DomainError when negative; callers must mask such pixels.
double noise_variance(NoiseParams params, double x);

// Exact compound corruption: per pixel, k ~ Poisson(x/a) scaled by a (skipped
// when a = 0), plus N(0, b). Requires a >= 0, b >= 0, and x >= 0 when a > 0.
Image pg_corrupt(const Image& img, NoiseParams params, Rng& rng);

// Gaussian-approximation sampler y ~ N(x, a*x + b), the generative model the
// fitting objective assumes. Requires a*x + b >= 0 at every pixel.
Image pg_corrupt_approx(const Image& img, NoiseParams params, Rng& rng);

}  // namespace pgd
