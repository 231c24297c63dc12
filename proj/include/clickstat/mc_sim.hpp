// ============================================================================
// mc_sim.hpp -- event-level Monte Carlo simulation of a pixelated photon
// detector. This is the independent oracle for the analytic formulas and the
// generator of synthetic pulse-area sample sets.
//
// Every trial draws from its own Philox substream addressed by
// (seed, trial index), so histograms are bitwise identical for a fixed seed
// regardless of how trials are partitioned over worker threads.
// ============================================================================
#pragma once

#include <cstdint>
#include <optional>
#include <thread>
#include <vector>

#include "clickstat/rng.hpp"
#include "clickstat/types.hpp"

namespace clickstat {

/// Pulse-area synthesis parameters: peak spacing, zero-click offset and the
/// electronic / per-click noise widths.
struct AupParams {
  double delta_x = 1.0;
  double x0 = 0.0;
  double sigma0 = 0.1;
  double sigma1 = 0.0;

  void validate() const {
    if (!(delta_x > 0.0) || !(sigma0 > 0.0) || !(sigma1 >= 0.0))
      throw validation_error("AupParams: require delta_x > 0, sigma0 > 0, sigma1 >= 0");
  }
};

struct SimConfig {
  DetectorConfig det;
  PhotonSource source;
  std::uint64_t n_trials = 1;
  std::uint64_t seed = 0;
  std::optional<AupParams> aup;

  void validate() const {
    det.validate();
    source.validate();
    if (n_trials < 1)
      throw validation_error("SimConfig: n_trials must be >= 1");
    if (aup) aup->validate();
  }
};

/// Summed per-trial counters, split by the first cause of each click.
struct SimBreakdown {
  std::uint64_t light_clicks = 0;
  std::uint64_t dark_clicks = 0;
  std::uint64_t crosstalk_clicks = 0;
  std::uint64_t preclicked_pixels = 0;
};

struct SimResult {
  std::vector<std::uint64_t> click_histogram; ///< counts over 0..N
  SimBreakdown breakdown;
  std::vector<double> areas; ///< one per trial if aup was set, else empty
  std::uint64_t n_trials = 0;

  ClickSample to_sample() const {
    ClickSample s;
    s.counts = click_histogram;
    s.n_trials = n_trials;
    return s;
  }

  std::vector<double> frequencies() const {
    std::vector<double> f(click_histogram.size());
    for (std::size_t k = 0; k < f.size(); ++k)
      f[k] = static_cast<double>(click_histogram[k]) / static_cast<double>(n_trials);
    return f;
  }
};

namespace detail {

enum : std::uint8_t { kPixelFree = 0, kPixelPreclicked = 1, kPixelClicked = 2 };

struct TrialScratch {
  std::vector<std::uint8_t> state;
  std::vector<std::uint32_t> frontier;
  std::vector<std::uint32_t> next_frontier;
};

/// Simulate one trial; returns the click count and updates the breakdown.
template <class PhotonCount>
inline int run_trial(Philox& rng, const DetectorConfig& det,
                     const PhotonCount& draw_photons,
                     const std::vector<double>& trigger_prob,
                     TrialScratch& scratch, SimBreakdown& bd) {
  const int n = det.n_pixels;
  auto& state = scratch.state;
  std::fill(state.begin(), state.end(), kPixelFree);

  // 1. pixels dead before the pulse
  if (det.preclick_prob > 0.0) {
    for (int i = 0; i < n; ++i)
      if (rng.bernoulli(det.preclick_prob)) {
        state[static_cast<std::size_t>(i)] = kPixelPreclicked;
        ++bd.preclicked_pixels;
      }
  }

  auto& frontier = scratch.frontier;
  frontier.clear();

  // 2./3. photons: survive with probability eta, land uniformly
  const long long n_photons = draw_photons(rng);
  for (long long ph = 0; ph < n_photons; ++ph) {
    if (det.efficiency < 1.0 && !rng.bernoulli(det.efficiency)) continue;
    const std::uint32_t px = rng.uniform_int(static_cast<std::uint32_t>(n));
    if (state[px] == kPixelFree) {
      state[px] = kPixelClicked;
      frontier.push_back(px);
      ++bd.light_clicks;
    }
  }

  // 4. Poisson dark events on uniform pixels
  if (det.dark_rate > 0.0) {
    PoissonSampler darks(det.dark_rate);
    const long long n_dark = darks(rng);
    for (long long d = 0; d < n_dark; ++d) {
      const std::uint32_t px = rng.uniform_int(static_cast<std::uint32_t>(n));
      if (state[px] == kPixelFree) {
        state[px] = kPixelClicked;
        frontier.push_back(px);
        ++bd.dark_clicks;
      }
    }
  }

  int clicks = static_cast<int>(frontier.size());

  // 6. cascade, generation by generation. Each untriggered pixel survives a
  // generation of P fresh clicks with probability (1-chi)^P; the collapsed
  // per-pixel Bernoulli below is exactly that product of independent
  // per-pair triggers.
  if (det.crosstalk > 0.0) {
    auto& next = scratch.next_frontier;
    while (!frontier.empty() && clicks < n) {
      const std::size_t p_sz = frontier.size() <= static_cast<std::size_t>(n)
                                   ? frontier.size()
                                   : static_cast<std::size_t>(n);
      const double p_trig = trigger_prob[p_sz];
      next.clear();
      for (int i = 0; i < n; ++i) {
        if (state[static_cast<std::size_t>(i)] != kPixelFree) continue;
        if (rng.bernoulli(p_trig)) {
          state[static_cast<std::size_t>(i)] = kPixelClicked;
          next.push_back(static_cast<std::uint32_t>(i));
          ++bd.crosstalk_clicks;
        }
      }
      clicks += static_cast<int>(next.size());
      frontier.swap(next);
    }
  }

  return clicks;
}

} // namespace detail

/// Run the full simulation. The result is independent of n_threads.
inline SimResult simulate(const SimConfig& cfg, int n_threads = 1) {
  cfg.validate();
  if (n_threads < 1) n_threads = 1;
  const int n = cfg.det.n_pixels;
  const std::uint64_t trials = cfg.n_trials;

  // collapsed per-pixel trigger probability for each frontier size
  std::vector<double> trigger_prob(static_cast<std::size_t>(n) + 1, 0.0);
  if (cfg.det.crosstalk > 0.0) {
    const double lq = std::log1p(-cfg.det.crosstalk);
    for (int p = 0; p <= n; ++p)
      trigger_prob[static_cast<std::size_t>(p)] = -std::expm1(p * lq);
  }

  SimResult result;
  result.n_trials = trials;
  result.click_histogram.assign(static_cast<std::size_t>(n) + 1, 0);
  if (cfg.aup) result.areas.assign(trials, 0.0);

  const int workers = static_cast<int>(
      std::min<std::uint64_t>(static_cast<std::uint64_t>(n_threads), trials));
  std::vector<std::vector<std::uint64_t>> hists(
      static_cast<std::size_t>(workers),
      std::vector<std::uint64_t>(static_cast<std::size_t>(n) + 1, 0));
  std::vector<SimBreakdown> breakdowns(static_cast<std::size_t>(workers));

  auto work = [&](int w, std::uint64_t lo, std::uint64_t hi) {
    detail::TrialScratch scratch;
    scratch.state.assign(static_cast<std::size_t>(n), 0);
    auto& hist = hists[static_cast<std::size_t>(w)];
    auto& bd = breakdowns[static_cast<std::size_t>(w)];

    auto run_range = [&](auto&& draw_photons) {
      for (std::uint64_t t = lo; t < hi; ++t) {
        Philox rng(cfg.seed, t);
        const int k = detail::run_trial(rng, cfg.det, draw_photons, trigger_prob,
                                        scratch, bd);
        ++hist[static_cast<std::size_t>(k)];
        if (cfg.aup) {
          const auto& a = *cfg.aup;
          const double s =
              std::sqrt(a.sigma0 * a.sigma0 + k * a.sigma1 * a.sigma1);
          result.areas[t] = a.x0 + k * a.delta_x + s * sample_normal(rng);
        }
      }
    };

    switch (cfg.source.kind) {
      case StateKind::Coherent: {
        PoissonSampler photons(cfg.source.parameter);
        run_range([&](Philox& r) { return photons(r); });
        break;
      }
      case StateKind::Thermal: {
        ThermalSampler photons(cfg.source.parameter);
        run_range([&](Philox& r) { return photons(r); });
        break;
      }
      case StateKind::Fock: {
        const long long n_fock = cfg.source.fock_n();
        run_range([&](Philox&) { return n_fock; });
        break;
      }
    }
  };

  if (workers == 1) {
    work(0, 0, trials);
  } else {
    std::vector<std::thread> pool;
    const std::uint64_t chunk = trials / static_cast<std::uint64_t>(workers);
    std::uint64_t lo = 0;
    for (int w = 0; w < workers; ++w) {
      const std::uint64_t hi = (w == workers - 1) ? trials : lo + chunk;
      pool.emplace_back(work, w, lo, hi);
      lo = hi;
    }
    for (auto& th : pool) th.join();
  }

  for (int w = 0; w < workers; ++w) {
    for (std::size_t k = 0; k < result.click_histogram.size(); ++k)
      result.click_histogram[k] += hists[static_cast<std::size_t>(w)][k];
    result.breakdown.light_clicks += breakdowns[static_cast<std::size_t>(w)].light_clicks;
    result.breakdown.dark_clicks += breakdowns[static_cast<std::size_t>(w)].dark_clicks;
    result.breakdown.crosstalk_clicks += breakdowns[static_cast<std::size_t>(w)].crosstalk_clicks;
    result.breakdown.preclicked_pixels += breakdowns[static_cast<std::size_t>(w)].preclicked_pixels;
  }
  return result;
}

/// Draw pulse areas for clicks distributed according to `dist`: the click
/// number k comes from the distribution, the area from a Gaussian centered
/// at x0 + k*delta_x with variance sigma0^2 + k*sigma1^2.
inline std::vector<double> sample_aup(const ClickDistribution& dist,
                                      const AupParams& aup,
                                      std::uint64_t n_samples,
                                      std::uint64_t seed) {
  dist.validate(1e-8);
  aup.validate();
  std::vector<double> cdf(dist.probs.size());
  long double acc = 0.0L;
  for (std::size_t k = 0; k < dist.probs.size(); ++k) {
    acc += dist.probs[k];
    cdf[k] = static_cast<double>(acc);
  }
  cdf.back() = 1.0;

  std::vector<double> areas(n_samples);
  for (std::uint64_t i = 0; i < n_samples; ++i) {
    Philox rng(seed, i);
    const double u = rng.uniform();
    const std::size_t k =
        static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const double s = std::sqrt(aup.sigma0 * aup.sigma0 +
                               static_cast<double>(k) * aup.sigma1 * aup.sigma1);
    areas[i] = aup.x0 + static_cast<double>(k) * aup.delta_x + s * sample_normal(rng);
  }
  return areas;
}

} // namespace clickstat
