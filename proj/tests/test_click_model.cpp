#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "clickstat/click_model.hpp"
#include "clickstat/estimators.hpp"
#include "clickstat/mc_sim.hpp"
#include "helpers.hpp"

using namespace clickstat;
using Catch::Matchers::WithinAbs;

namespace {

DetectorConfig detector(int n, double eta = 1.0, double nu = 0.0) {
  DetectorConfig det;
  det.n_pixels = n;
  det.efficiency = eta;
  det.dark_rate = nu;
  return det;
}

} // namespace

TEST_CASE("generating function identities") {
  CHECK(normal_ordered_gf(PhotonSource::coherent(3.0), 0.0, 0.0) == 1.0);
  CHECK(normal_ordered_gf(PhotonSource::thermal(3.0), 0.0, 0.0) == 1.0);
  CHECK(normal_ordered_gf(PhotonSource::fock(7), 0.0, 0.0) == 1.0);
  CHECK(normal_ordered_gf(PhotonSource::fock(0), 0.5, 0.0) == 1.0);
  CHECK_THAT(normal_ordered_gf(PhotonSource::coherent(1.0), 1.0, 0.0),
             WithinAbs(std::exp(-1.0), 1e-15));
  CHECK_THAT(normal_ordered_gf(PhotonSource::thermal(2.0), 0.5, 0.3),
             WithinAbs(std::exp(-0.3) / 2.0, 1e-15));
  CHECK_THROWS_AS(normal_ordered_gf(PhotonSource::fock(2), 1.0 + 1e-9, 0.0),
                  validation_error);
  CHECK_THROWS_AS(normal_ordered_gf(PhotonSource::coherent(1.0), -0.1, 0.0),
                  validation_error);
}

TEST_CASE("single-pixel no-click frequency matches the generating function") {
  // <: exp(-n_hat) :> for |alpha|^2 = 1 equals the no-click probability of a
  // one-pixel detector, estimated by Monte Carlo
  SimConfig cfg;
  cfg.det = detector(1);
  cfg.source = PhotonSource::coherent(1.0);
  cfg.n_trials = 1000000;
  cfg.seed = 2024;
  const auto r = simulate(cfg);
  const double f0 = static_cast<double>(r.click_histogram[0]) / 1e6;
  const double expected = normal_ordered_gf(cfg.source, 1.0, 0.0);
  CHECK_THAT(f0, WithinAbs(expected, 3.0 * std::sqrt(expected * (1 - expected) / 1e6)));
}

TEST_CASE("coherent closed form: frozen values") {
  SECTION("vacuum never clicks") {
    const auto d = coherent_click_distribution(0.0, 10);
    CHECK(d.probs[0] == 1.0);
    for (int k = 1; k <= 10; ++k) CHECK(d.probs[(std::size_t)k] == 0.0);
  }
  SECTION("saturation") {
    const auto d = coherent_click_distribution(1e6, 10);
    CHECK_THAT(d.probs[10], WithinAbs(1.0, 1e-10));
  }
  SECTION("mu=2, N=2 by direct substitution") {
    const auto d = coherent_click_distribution(2.0, 2);
    const double e1 = std::exp(-1.0);
    CHECK_THAT(d.probs[0], WithinAbs(std::exp(-2.0), 1e-14));
    CHECK_THAT(d.probs[1], WithinAbs(2.0 * e1 * (1.0 - e1), 1e-14));
    CHECK_THAT(d.probs[2], WithinAbs((1.0 - e1) * (1.0 - e1), 1e-14));
  }
  SECTION("mu=2, N=2 against Monte Carlo") {
    SimConfig cfg;
    cfg.det = detector(2);
    cfg.source = PhotonSource::coherent(2.0);
    cfg.n_trials = 1000000;
    cfg.seed = 7;
    const auto r = simulate(cfg);
    const auto d = coherent_click_distribution(2.0, 2);
    CHECK(testutil::worst_bin_z(d.probs, r.click_histogram, cfg.n_trials) < 3.0);
  }
}

TEST_CASE("click_distribution spec examples") {
  SECTION("coherent vacuum") {
    const auto d = click_distribution(PhotonSource::coherent(0.0), detector(100));
    CHECK(d.probs[0] == 1.0);
  }
  SECTION("coherent mu = N = 100 is Binomial(100, 1 - 1/e)") {
    const auto d = click_distribution(PhotonSource::coherent(100.0), detector(100));
    const auto oracle = testutil::binomial_distribution_vector(100, -std::expm1(-1.0));
    for (int k = 0; k <= 100; ++k)
      CHECK_THAT(d.probs[(std::size_t)k], WithinAbs(oracle.probs[(std::size_t)k], 1e-12));
  }
  SECTION("one photon, unit efficiency: exactly one click") {
    const auto d = click_distribution(PhotonSource::fock(1), detector(4));
    CHECK_THAT(d.probs[1], WithinAbs(1.0, 1e-14));
    CHECK_THAT(d.probs[0], WithinAbs(0.0, 1e-14));
  }
  SECTION("thermal vs Monte Carlo: nbar=2, N=8, eta=0.6, nu=0.05") {
    const auto det = detector(8, 0.6, 0.05);
    const auto d = click_distribution(PhotonSource::thermal(2.0), det);
    SimConfig cfg;
    cfg.det = det;
    cfg.source = PhotonSource::thermal(2.0);
    cfg.n_trials = 1000000;
    cfg.seed = 99;
    const auto r = simulate(cfg);
    CHECK(testutil::worst_bin_z(d.probs, r.click_histogram, cfg.n_trials) < 3.0);
  }
}

TEST_CASE("normalization across the state/parameter grid") {
  for (int n : {1, 2, 10, 100}) {
    for (double mu : {0.0, 0.1, 1.0, 10.0, 100.0, 300.0}) {
      for (int kind = 0; kind < 3; ++kind) {
        PhotonSource src;
        if (kind == 0) src = PhotonSource::coherent(mu);
        if (kind == 1) src = PhotonSource::thermal(mu);
        if (kind == 2) src = PhotonSource::fock(static_cast<long long>(mu));
        const auto d = click_distribution(src, detector(n));
        long double sum = 0.0L;
        double min_p = 1.0;
        for (double p : d.probs) {
          sum += p;
          min_p = std::min(min_p, p);
        }
        INFO("kind=" << kind << " mu=" << mu << " N=" << n);
        CHECK(std::fabs(static_cast<double>(sum) - 1.0) <= 1e-10);
        CHECK(min_p >= 0.0);
      }
    }
  }
}

TEST_CASE("coherent consistency with the generic alternating-sum route") {
  // the closed form of the binomial case must agree with the general
  // expansion evaluated for a coherent state
  for (int n : {1, 2, 10, 100}) {
    for (double mu : {0.1, 1.0, 10.0, 100.0}) {
      const auto det = detector(n, 0.9, 0.02);
      const auto generic =
          detail::click_distribution_generic(PhotonSource::coherent(mu), det);
      const auto closed = coherent_click_distribution(0.9 * mu + 0.02, n);
      for (int k = 0; k <= n; ++k) {
        INFO("N=" << n << " mu=" << mu << " k=" << k);
        CHECK_THAT(generic.probs[(std::size_t)k],
                   WithinAbs(closed.probs[(std::size_t)k], 1e-12));
      }
    }
  }
}

TEST_CASE("click_distribution(Coherent) equals the closed form with folded noise") {
  const auto det = detector(100, 0.75, 0.3);
  const auto a = click_distribution(PhotonSource::coherent(42.0), det);
  const auto b = coherent_click_distribution(0.75 * 42.0 + 0.3, 100);
  for (int k = 0; k <= 100; ++k)
    CHECK_THAT(a.probs[(std::size_t)k], WithinAbs(b.probs[(std::size_t)k], 1e-10));
}

TEST_CASE("fock distribution equals the occupancy mixture oracle") {
  // independent all-positive route: photons thinned by eta, then the exact
  // occupied-bin recursion
  const int n_pixels = 100;
  for (long long n_photons : {3LL, 50LL, 150LL}) {
    for (double eta : {0.6, 1.0}) {
      const auto det = detector(n_pixels, eta);
      const auto d = click_distribution(PhotonSource::fock(n_photons), det);
      const auto m = detail::click_given_photons_matrix(
          n_pixels, eta, static_cast<int>(n_photons));
      for (int k = 0; k <= n_pixels; ++k) {
        INFO("n=" << n_photons << " eta=" << eta << " k=" << k);
        CHECK_THAT(d.probs[(std::size_t)k],
                   WithinAbs(m(k, static_cast<int>(n_photons)), 1e-13));
      }
    }
  }
}

TEST_CASE("monotone saturation of the coherent mean") {
  double prev = -1.0;
  for (double mu : {0.0, 0.5, 1.0, 5.0, 20.0, 100.0, 400.0, 2000.0}) {
    const double mean = click_distribution(PhotonSource::coherent(mu), detector(100)).mean();
    CHECK(mean >= prev);
    prev = mean;
  }
}

TEST_CASE("coherent mean identity") {
  for (double mu : {0.1, 1.0, 10.0, 100.0, 300.0}) {
    const auto det = detector(100, 0.8, 0.05);
    const auto d = click_distribution(PhotonSource::coherent(mu), det);
    const double expected = 100.0 * -std::expm1(-(0.8 * mu + 0.05) / 100.0);
    CHECK_THAT(d.mean(), WithinAbs(expected, 1e-10));
  }
}

TEST_CASE("Monte Carlo oracle equivalence per state kind") {
  const std::uint64_t trials = 1000000;
  struct Case {
    PhotonSource src;
    DetectorConfig det;
    std::uint64_t seed;
  };
  const Case cases[] = {
      {PhotonSource::coherent(50.0), detector(10, 0.8, 0.01), 11},
      {PhotonSource::thermal(5.0), detector(10, 0.7, 0.0), 12},
      {PhotonSource::fock(7), detector(10, 0.5, 0.02), 13},
  };
  for (const auto& c : cases) {
    const auto d = click_distribution(c.src, c.det);
    SimConfig cfg;
    cfg.det = c.det;
    cfg.source = c.src;
    cfg.n_trials = trials;
    cfg.seed = c.seed;
    const auto r = simulate(cfg);
    const double tv = testutil::tv_distance(d.probs, r.frequencies());
    INFO("kind=" << to_string(c.src.kind));
    CHECK(tv <= 5.0 * std::sqrt(static_cast<double>(c.det.n_pixels) / trials));
  }
}

TEST_CASE("fock photon numbers beyond the pixel count stay valid") {
  const auto d = click_distribution(PhotonSource::fock(150), detector(100, 0.6, 0.001));
  long double sum = 0.0L;
  for (double p : d.probs) sum += p;
  CHECK(std::fabs(static_cast<double>(sum) - 1.0) <= 1e-10);
  const auto d2 = click_distribution(PhotonSource::fock(500), detector(4));
  CHECK_THAT(d2.probs[4], WithinAbs(1.0, 1e-10)); // saturation
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(click_distribution(PhotonSource::coherent(-1.0), detector(4)),
                  validation_error);
  CHECK_THROWS_AS(click_distribution(PhotonSource::fock(2), detector(0)),
                  validation_error);
  CHECK_THROWS_AS(coherent_click_distribution(1.0, 0), validation_error);
  PhotonSource bad;
  bad.kind = StateKind::Fock;
  bad.parameter = 1.5;
  CHECK_THROWS_AS(click_distribution(bad, detector(4)), validation_error);
}
