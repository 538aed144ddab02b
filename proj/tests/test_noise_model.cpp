#include <cmath>

#include "doctest.h"
#include "pgdenoise/errors.hpp"
#include "pgdenoise/noise_model.hpp"

using namespace pgd;

namespace {

// One unit in the third significant digit of v: the printing precision of
// the reference table (which truncates rather than rounds, e.g. 0.0015379
// appears as 0.00153).
double ulp3(double v) { return std::pow(10.0, std::floor(std::log10(std::fabs(v))) - 2); }

}  // namespace

TEST_CASE("spec_to_params reproduces the reference (a, b) grid to 3 significant digits") {
  struct Row {
    double lambda, sigma, a, b;
  };
  const Row rows[] = {
      {50, 10, 0.0200, 0.00153},
      {40, 20, 0.0250, 0.00615},
      {30, 30, 0.0333, 0.0138},
      {20, 40, 0.0500, 0.0246},
      {10, 50, 0.100, 0.0384},
  };
  for (const auto& row : rows) {
    const NoiseParams p = spec_to_params({row.lambda, row.sigma});
    CHECK(std::fabs(p.a - row.a) < ulp3(row.a));
    CHECK(std::fabs(p.b - row.b) < ulp3(row.b));
  }
}

TEST_CASE("spec_to_params identity corruption") {
  const NoiseParams p = spec_to_params({0, 0});
  CHECK(p.a == 0.0);
  CHECK(p.b == 0.0);
}

TEST_CASE("noise_variance evaluates the affine model") {
  CHECK(noise_variance({0.02, 0.0015}, 0.5) == doctest::Approx(0.0115));
  for (double x : {0.0, 0.3, 1.0, 7.5}) CHECK(noise_variance({0.0, 0.25}, x) == 0.25);
  CHECK(noise_variance({0.1, 0.0}, 0.0) == 0.0);
  CHECK_THROWS_AS(noise_variance({0.1, -0.5}, 0.1), DomainError);
}

TEST_CASE("pg_corrupt identity at (0,0)") {
  Image img(8, 8);
  for (size_t i = 0; i < img.size(); ++i) img.data[i] = static_cast<float>(i) * 0.01f;
  Rng rng(3);
  const Image out = pg_corrupt(img, {0, 0}, rng);
  CHECK(out.data == img.data);
}

TEST_CASE("pg_corrupt of zero image under pure Poisson is exactly zero") {
  Image img(16, 16, 0.0f);
  Rng rng(4);
  const Image out = pg_corrupt(img, {0.05, 0.0}, rng);
  for (float v : out.data) CHECK(v == 0.0f);
}

TEST_CASE("pg_corrupt moment fidelity (law of large numbers)") {
  // E[y] = x, Var[y] = a*x + b; tolerance 4 standard errors.
  const double x = 0.5, a = 0.02, b = 0.0015;
  const int n = 400000;
  Image img(n / 100, 100, static_cast<float>(x));
  Rng rng(77);
  const Image out = pg_corrupt(img, {a, b}, rng);
  double sum = 0, sum2 = 0;
  for (float v : out.data) {
    sum += v;
    sum2 += static_cast<double>(v) * v;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  const double true_var = a * x + b;
  const double se_mean = std::sqrt(true_var / n);
  const double se_var = true_var * std::sqrt(2.0 / n) * 2.0;  // inflated for Poisson kurtosis
  CHECK(std::fabs(mean - x) < 4 * se_mean);
  CHECK(std::fabs(var - true_var) < 4 * se_var);
}

TEST_CASE("pg_corrupt is bit-identical across runs with one seed") {
  Image img(32, 32, 0.4f);
  Rng r1(123), r2(123);
  const Image a = pg_corrupt(img, {0.05, 0.001}, r1);
  const Image b = pg_corrupt(img, {0.05, 0.001}, r2);
  CHECK(a.data == b.data);
}

TEST_CASE("pg_corrupt rejects invalid synthesis inputs") {
  Image img(2, 2, 0.5f);
  Rng rng(1);
  CHECK_THROWS_AS(pg_corrupt(img, {-0.01, 0.0}, rng), ArgumentError);
  CHECK_THROWS_AS(pg_corrupt(img, {0.01, -0.001}, rng), ArgumentError);
  Image neg(2, 2, -0.25f);
  CHECK_THROWS_AS(pg_corrupt(neg, {0.01, 0.0}, rng), DomainError);
  // Pure Gaussian accepts negative clean values.
  const Image ok = pg_corrupt(neg, {0.0, 0.001}, rng);
  CHECK(ok.size() == neg.size());
}

TEST_CASE("pg_corrupt_approx matches the affine moments") {
  const double x = 0.4, a = 0.05, b = 0.002;
  const int n = 200000;
  Image img(n / 100, 100, static_cast<float>(x));
  Rng rng(31);
  const Image out = pg_corrupt_approx(img, {a, b}, rng);
  double sum = 0, sum2 = 0;
  for (float v : out.data) {
    sum += v;
    sum2 += static_cast<double>(v) * v;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  const double true_var = a * x + b;
  CHECK(std::fabs(mean - x) < 4 * std::sqrt(true_var / n));
  CHECK(std::fabs(var - true_var) < 4 * true_var * std::sqrt(2.0 / n));
}
