// ============================================================================
// rng.hpp -- counter-based random number generation and the samplers used by
// the Monte Carlo simulator.
//
// Philox4x32-10 is used so that every trial of a simulation owns an
// independent substream addressed by (master seed, trial index). Results are
// then identical no matter how trials are distributed over threads.
// ============================================================================
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace clickstat {

/// Philox4x32-10 counter-based generator. The 64-bit key selects the family,
/// the stream id addresses a substream, and blocks are generated from an
/// incrementing 64-bit block counter.
class Philox {
public:
  using result_type = std::uint64_t;

  Philox(std::uint64_t key, std::uint64_t stream)
      : key0_(static_cast<std::uint32_t>(key)),
        key1_(static_cast<std::uint32_t>(key >> 32)),
        stream_lo_(static_cast<std::uint32_t>(stream)),
        stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<std::uint64_t>::max(); }

  result_type operator()() {
    if (have_ == 0) refill();
    --have_;
    return out_[have_];
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1].
  double uniform_open() {
    return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Lemire multiply-shift; the modulo bias of
  /// < 2^-57 for the pixel counts used here is far below statistical noise.
  std::uint32_t uniform_int(std::uint32_t n) {
    const std::uint64_t x = (*this)();
    return static_cast<std::uint32_t>(
        (static_cast<unsigned __int128>(x) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

private:
  static void round(std::uint32_t ctr[4], std::uint32_t k0, std::uint32_t k1) {
    const std::uint64_t p0 = 0xD2511F53ULL * ctr[0];
    const std::uint64_t p1 = 0xCD9E8D57ULL * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t c1 = ctr[1], c3 = ctr[3];
    ctr[0] = hi1 ^ c1 ^ k0;
    ctr[1] = lo1;
    ctr[2] = hi0 ^ c3 ^ k1;
    ctr[3] = lo0;
  }

  void refill() {
    std::uint32_t ctr[4] = {static_cast<std::uint32_t>(block_),
                            static_cast<std::uint32_t>(block_ >> 32),
                            stream_lo_, stream_hi_};
    std::uint32_t k0 = key0_, k1 = key1_;
    round(ctr, k0, k1);
    for (int r = 1; r < 10; ++r) {
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
      round(ctr, k0, k1);
    }
    out_[0] = (static_cast<std::uint64_t>(ctr[1]) << 32) | ctr[0];
    out_[1] = (static_cast<std::uint64_t>(ctr[3]) << 32) | ctr[2];
    have_ = 2;
    ++block_;
  }

  std::uint32_t key0_, key1_;
  std::uint32_t stream_lo_, stream_hi_;
  std::uint64_t block_ = 0;
  std::uint64_t out_[2] = {0, 0};
  int have_ = 0;
};

/// Raw Philox block, exposed for known-answer tests.
inline void philox4x32_10(const std::uint32_t ctr_in[4], const std::uint32_t key_in[2],
                          std::uint32_t out[4]) {
  std::uint32_t ctr[4] = {ctr_in[0], ctr_in[1], ctr_in[2], ctr_in[3]};
  std::uint32_t k0 = key_in[0], k1 = key_in[1];
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    const std::uint64_t p0 = 0xD2511F53ULL * ctr[0];
    const std::uint64_t p1 = 0xCD9E8D57ULL * ctr[2];
    const std::uint32_t c1 = ctr[1], c3 = ctr[3];
    ctr[0] = static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ k0;
    ctr[1] = static_cast<std::uint32_t>(p1);
    ctr[2] = static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ k1;
    ctr[3] = static_cast<std::uint32_t>(p0);
  }
  out[0] = ctr[0];
  out[1] = ctr[1];
  out[2] = ctr[2];
  out[3] = ctr[3];
}

/// Poisson sampler. Knuth's product method below the threshold, Hormann's
/// PTRS transformed rejection above it; constants are precomputed once so the
/// sampler can be reused across trials.
class PoissonSampler {
public:
  explicit PoissonSampler(double lambda) : lambda_(lambda) {
    if (lambda_ < kThreshold) {
      exp_neg_lambda_ = std::exp(-lambda_);
    } else {
      log_lambda_ = std::log(lambda_);
      b_ = 0.931 + 2.53 * std::sqrt(lambda_);
      a_ = -0.059 + 0.02483 * b_;
      inv_alpha_ = 1.1239 + 1.1328 / (b_ - 3.4);
      v_r_ = 0.9277 - 3.6224 / (b_ - 2.0);
    }
  }

  template <class Rng>
  long long operator()(Rng& rng) const {
    if (lambda_ <= 0.0) return 0;
    if (lambda_ < kThreshold) {
      long long k = 0;
      double p = 1.0;
      do {
        ++k;
        p *= rng.uniform_open();
      } while (p > exp_neg_lambda_);
      return k - 1;
    }
    for (;;) {
      const double u = rng.uniform() - 0.5;
      const double v = rng.uniform_open();
      const double us = 0.5 - std::fabs(u);
      const double kf = std::floor((2.0 * a_ / us + b_) * u + lambda_ + 0.43);
      if (us >= 0.07 && v <= v_r_) return static_cast<long long>(kf);
      if (kf < 0.0 || (us < 0.013 && v > us)) continue;
      const double k = kf;
      if (std::log(v * inv_alpha_ / (a_ / (us * us) + b_)) <=
          k * log_lambda_ - lambda_ - std::lgamma(k + 1.0))
        return static_cast<long long>(kf);
    }
  }

private:
  static constexpr double kThreshold = 10.0;
  double lambda_;
  double exp_neg_lambda_ = 0.0;
  double log_lambda_ = 0.0, a_ = 0.0, b_ = 0.0, inv_alpha_ = 0.0, v_r_ = 0.0;
};

/// Single-mode thermal (Bose-Einstein) occupation sampler via inversion of
/// the geometric distribution on {0, 1, ...}.
class ThermalSampler {
public:
  explicit ThermalSampler(double nbar) : nbar_(nbar) {
    if (nbar_ > 0.0) log_q_ = std::log(nbar_ / (1.0 + nbar_));
  }

  template <class Rng>
  long long operator()(Rng& rng) const {
    if (nbar_ <= 0.0) return 0;
    const double u = rng.uniform_open();
    const double n = std::floor(std::log(u) / log_q_);
    return n > 9.0e15 ? 9000000000000000LL : static_cast<long long>(n);
  }

private:
  double nbar_;
  double log_q_ = 0.0;
};

/// One standard normal deviate by Box-Muller (cosine branch).
template <class Rng>
inline double sample_normal(Rng& rng) {
  const double u1 = rng.uniform_open();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

} // namespace clickstat
