#include "pgdenoise/noise_model.hpp"

#include <cmath>
#include <string>

#include "pgdenoise/errors.hpp"

namespace pgd {

NoiseParams spec_to_params(SyntheticNoiseSpec spec) {
  if (spec.lambda < 0 || spec.sigma < 0)
    throw ArgumentError("spec_to_params: lambda and sigma must be >= 0");
  NoiseParams p;
  p.a = spec.lambda > 0 ? 1.0 / spec.lambda : 0.0;
  const double s = spec.sigma / 255.0;
  p.b = s * s;
  return p;
}

double noise_variance(NoiseParams params, double x) {
  const double v = params.a * x + params.b;
  if (v < 0)
    throw DomainError("noise_variance: a*x + b = " + std::to_string(v) + " < 0 at x = " +
                      std::to_string(x));
  return v;
}

Image pg_corrupt(const Image& img, NoiseParams params, Rng& rng) {
  if (params.a < 0) throw ArgumentError("pg_corrupt: sampling requires a >= 0");
  if (params.b < 0) throw ArgumentError("pg_corrupt: sampling requires b >= 0");
  const double sigma = std::sqrt(params.b);
  Image out(img.width, img.height);
  for (size_t i = 0; i < img.size(); ++i) {
    const double x = img.data[i];
    double t;
    if (params.a > 0) {
      if (x < 0)
        throw DomainError("pg_corrupt: negative clean pixel " + std::to_string(x) +
                          " with a > 0");
      t = params.a * static_cast<double>(rng.poisson(x / params.a));
    } else {
      t = x;
    }
    if (params.b > 0) t += sigma * rng.normal();
    out.data[i] = static_cast<float>(t);
  }
  return out;
}

Image pg_corrupt_approx(const Image& img, NoiseParams params, Rng& rng) {
  Image out(img.width, img.height);
  for (size_t i = 0; i < img.size(); ++i) {
    const double x = img.data[i];
    const double v = params.a * x + params.b;
    if (v < 0)
      throw DomainError("pg_corrupt_approx: a*x + b < 0 at x = " + std::to_string(x));
    out.data[i] = static_cast<float>(x + std::sqrt(v) * rng.normal());
  }
  return out;
}

}  // namespace pgd
