#include <catch2/catch_amalgamated.hpp>

#include "clickstat/rng.hpp"

#include <cmath>
#include <cstdint>

using clickstat::Philox;
using clickstat::PoissonSampler;
using clickstat::ThermalSampler;

TEST_CASE("philox4x32-10 known-answer vectors") {
  // Reference vectors from the Random123 known-answer tests.
  {
    const std::uint32_t ctr[4] = {0, 0, 0, 0};
    const std::uint32_t key[2] = {0, 0};
    std::uint32_t out[4];
    clickstat::philox4x32_10(ctr, key, out);
    CHECK(out[0] == 0x6627e8d5u);
    CHECK(out[1] == 0xe169c58du);
    CHECK(out[2] == 0xbc57ac4cu);
    CHECK(out[3] == 0x9b00dbd8u);
  }
  {
    const std::uint32_t ctr[4] = {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu};
    const std::uint32_t key[2] = {0xffffffffu, 0xffffffffu};
    std::uint32_t out[4];
    clickstat::philox4x32_10(ctr, key, out);
    CHECK(out[0] == 0x408f276du);
    CHECK(out[1] == 0x41c83b0eu);
    CHECK(out[2] == 0xa20bc7c6u);
    CHECK(out[3] == 0x6d5451fdu);
  }
  {
    const std::uint32_t ctr[4] = {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u};
    const std::uint32_t key[2] = {0xa4093822u, 0x299f31d0u};
    std::uint32_t out[4];
    clickstat::philox4x32_10(ctr, key, out);
    CHECK(out[0] == 0xd16cfe09u);
    CHECK(out[1] == 0x94fdccebu);
    CHECK(out[2] == 0x5001e420u);
    CHECK(out[3] == 0x24126ea1u);
  }
}

TEST_CASE("streams are independent of draw history") {
  Philox a(42, 7);
  Philox b(42, 7);
  for (int i = 0; i < 100; ++i) (void)a();
  Philox c(42, 8);
  // fresh generator with the same (key, stream) replays the same sequence
  Philox a2(42, 7);
  Philox b2(42, 7);
  std::vector<std::uint64_t> s1, s2;
  for (int i = 0; i < 16; ++i) {
    s1.push_back(a2());
    s2.push_back(b2());
  }
  CHECK(s1 == s2);
  // a different stream is a different sequence
  bool all_equal = true;
  Philox a3(42, 7);
  for (int i = 0; i < 16; ++i)
    if (a3() != c()) all_equal = false;
  CHECK_FALSE(all_equal);
}

TEST_CASE("uniform stays in [0,1) and has the right mean") {
  Philox rng(123, 0);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK_THAT(sum / n, Catch::Matchers::WithinAbs(0.5, 0.005));
}

TEST_CASE("poisson sampler matches mean and variance") {
  for (double lambda : {0.1, 3.0, 25.0, 300.0}) {
    PoissonSampler poisson(lambda);
    Philox rng(99, static_cast<std::uint64_t>(lambda * 1000));
    const int n = 200000;
    long double sum = 0.0L, sq = 0.0L;
    for (int i = 0; i < n; ++i) {
      const double k = static_cast<double>(poisson(rng));
      sum += k;
      sq += k * k;
    }
    const double mean = static_cast<double>(sum / n);
    const double var = static_cast<double>(sq / n) - mean * mean;
    // 5 sigma on the mean estimate
    const double tol_mean = 5.0 * std::sqrt(lambda / n);
    CHECK_THAT(mean, Catch::Matchers::WithinAbs(lambda, tol_mean));
    CHECK_THAT(var / lambda, Catch::Matchers::WithinAbs(1.0, 0.05));
  }
}

TEST_CASE("thermal sampler matches the Bose-Einstein law") {
  const double nbar = 2.0;
  ThermalSampler thermal(nbar);
  Philox rng(7, 0);
  const int n = 400000;
  std::vector<long long> hist(40, 0);
  long double sum = 0.0L, sq = 0.0L;
  for (int i = 0; i < n; ++i) {
    const long long k = thermal(rng);
    sum += static_cast<long double>(k);
    sq += static_cast<long double>(k) * static_cast<long double>(k);
    if (k < static_cast<long long>(hist.size())) ++hist[static_cast<std::size_t>(k)];
  }
  const double mean = static_cast<double>(sum / n);
  const double var = static_cast<double>(sq / n) - mean * mean;
  CHECK_THAT(mean, Catch::Matchers::WithinAbs(nbar, 5.0 * std::sqrt(nbar * (nbar + 1.0) / n)));
  // thermal variance nbar(1+nbar)
  CHECK_THAT(var, Catch::Matchers::WithinRel(nbar * (1.0 + nbar), 0.05));
  // pointwise pmf check for the first few occupations
  for (int k = 0; k < 5; ++k) {
    const double p = std::pow(nbar / (1.0 + nbar), k) / (1.0 + nbar);
    const double f = static_cast<double>(hist[static_cast<std::size_t>(k)]) / n;
    CHECK_THAT(f, Catch::Matchers::WithinAbs(p, 5.0 * std::sqrt(p * (1 - p) / n)));
  }
}

TEST_CASE("normal sampler moments") {
  Philox rng(1234, 5);
  const int n = 400000;
  long double sum = 0.0L, sq = 0.0L;
  for (int i = 0; i < n; ++i) {
    const double z = clickstat::sample_normal(rng);
    sum += z;
    sq += z * z;
  }
  CHECK_THAT(static_cast<double>(sum / n), Catch::Matchers::WithinAbs(0.0, 0.01));
  CHECK_THAT(static_cast<double>(sq / n), Catch::Matchers::WithinAbs(1.0, 0.02));
}
