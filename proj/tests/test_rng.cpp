#include <cmath>
#include <vector>

#include "doctest.h"
#include "pgdenoise/errors.hpp"
#include "pgdenoise/rng.hpp"

using namespace pgd;

TEST_CASE("equal seeds give bit-identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42), d(43);
  int diff = 0;
  for (int i = 0; i < 100; ++i) diff += c.next_u64() != d.next_u64();
  CHECK(diff > 90);
}

TEST_CASE("split streams are independent of parent consumption") {
  Rng parent(7);
  Rng child1 = parent.split(streams::kCrop);
  parent.next_u64();
  parent.next_u64();
  Rng child2 = Rng(7).split(streams::kCrop);
  for (int i = 0; i < 100; ++i) CHECK(child1.next_u64() == child2.next_u64());

  Rng other = Rng(7).split(streams::kNoise);
  int diff = 0;
  Rng child3 = Rng(7).split(streams::kCrop);
  for (int i = 0; i < 100; ++i) diff += other.next_u64() != child3.next_u64();
  CHECK(diff > 90);
}

TEST_CASE("uniform stays in [0,1) and below is in range") {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < 10000; ++i) CHECK(rng.below(7) < 7);
  CHECK_THROWS_AS(rng.below(0), ArgumentError);
}

TEST_CASE("normal moments") {
  Rng rng(2024);
  const int n = 200000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  // 4 standard errors: se(mean) = 1/sqrt(n), se(var) ~ sqrt(2/n).
  CHECK(std::fabs(mean) < 4.0 / std::sqrt(double(n)));
  CHECK(std::fabs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("poisson moments across the sampler switch") {
  // Means below and above the inversion/PTRS threshold at 10.
  for (double mean : {0.3, 4.0, 9.9, 10.1, 25.0, 50.0}) {
    Rng rng(static_cast<uint64_t>(mean * 1000));
    const int n = 200000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
      const double k = static_cast<double>(rng.poisson(mean));
      sum += k;
      sum2 += k * k;
    }
    const double m = sum / n;
    const double var = sum2 / n - m * m;
    const double se_mean = std::sqrt(mean / n);
    // Poisson variance of the sample variance ~ (mu + 2 mu^2)/n.
    const double se_var = std::sqrt((mean + 2.0 * mean * mean) / n);
    CHECK(std::fabs(m - mean) < 4.0 * se_mean);
    CHECK(std::fabs(var - mean) < 4.0 * se_var);
  }
}

TEST_CASE("poisson edge cases") {
  Rng rng(5);
  CHECK(rng.poisson(0.0) == 0);
  CHECK_THROWS_AS(rng.poisson(-1.0), ArgumentError);
}
