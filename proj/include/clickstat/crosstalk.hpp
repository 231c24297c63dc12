// ============================================================================
// crosstalk.hpp -- cascaded crosstalk statistics and their combination with
// light-induced click statistics.
//
// One generation of crosstalk from N_P previously clicked pixels onto N_A
// available pixels is binomial with per-pixel trigger probability
// 1 - (1-chi)^{N_P}. The total cascade size sums over ordered sequences of
// generation sizes (a_1, a_2, ...); the generation recursion
//
//   f(k, N_A, N_P) = sum_{j=1..k} C_j(N_A, N_P) f(k-j, N_A-j, j),
//   f(0, N_A, N_P) = C_0(N_A, N_P)
//
// computes exactly that sum in polynomial time via memoization. The sum is
// over compositions, not unordered partitions: the factors depend on the
// order in which generations fire.
// ============================================================================
#pragma once

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "clickstat/click_model.hpp"
#include "clickstat/detail/numeric.hpp"
#include "clickstat/types.hpp"

namespace clickstat {

/// Probability of exactly k crosstalk clicks in one generation, given
/// n_previous freshly clicked pixels and n_available untriggered ones.
inline double crosstalk_generation(int k, int n_available, int n_previous,
                                   double chi) {
  if (!(chi >= 0.0 && chi < 1.0))
    throw validation_error("crosstalk_generation: chi must be in [0, 1)");
  if (n_available < 0 || n_previous < 0)
    throw validation_error("crosstalk_generation: counts must be >= 0");
  if (k < 0 || k > n_available)
    throw validation_error("crosstalk_generation: k must be in 0..n_available");
  // log survival of one pixel against n_previous independent triggers
  const double log_q1 = std::log1p(-chi);
  const double p = -std::expm1(n_previous * log_q1);
  const double log_survive_all =
      static_cast<double>(n_previous) * static_cast<double>(n_available - k) * log_q1;
  if (k == 0) return std::exp(log_survive_all);
  return static_cast<double>(std::exp(detail::lchoose(n_available, k))) *
         std::pow(p, k) * std::exp(log_survive_all);
}

/// Memoized cascade solver for one (chi, N) pair. The memo table is filled
/// lazily; populate it from a single thread (e.g. via warm_up or a first
/// pass of queries), after which concurrent const reads are safe.
class CrosstalkKernel {
public:
  CrosstalkKernel(double chi, int n_pixels)
      : chi_(chi), n_(n_pixels) {
    if (!(chi >= 0.0 && chi < 1.0))
      throw validation_error("CrosstalkKernel: chi must be in [0, 1)");
    if (n_pixels < 1)
      throw validation_error("CrosstalkKernel: n_pixels must be >= 1");
    const std::size_t np1 = static_cast<std::size_t>(n_) + 1;
    // (1-chi)^m and 1-(1-chi)^m for every exponent the recursion can reach
    const double log_q1 = std::log1p(-chi_);
    pw_.resize(np1 * np1);
    om_.resize(np1);
    for (std::size_t m = 0; m < pw_.size(); ++m)
      pw_[m] = std::exp(static_cast<double>(m) * log_q1);
    for (std::size_t m = 0; m < np1; ++m)
      om_[m] = -std::expm1(static_cast<double>(m) * log_q1);
    if (np1 * np1 * np1 <= kDenseLimit) {
      dense_.assign(np1 * np1 * np1, -1.0);
      use_dense_ = true;
    }
    pascal_ = std::make_shared<detail::PascalTable>(n_);
  }

  double chi() const { return chi_; }
  int n_pixels() const { return n_; }

  /// One-generation probability, from the precomputed power tables.
  double generation(int k, int n_available, int n_previous) const {
    const double p = om_[static_cast<std::size_t>(n_previous)];
    const double q_all = pw_[static_cast<std::size_t>(n_previous) *
                             static_cast<std::size_t>(n_available - k)];
    if (k == 0) return q_all;
    double pk = p;
    for (int i = 1; i < k; ++i) pk *= p;
    return static_cast<double>((*pascal_)(n_available, k)) * pk * q_all;
  }

  /// P(total crosstalk-added clicks = k | state), the memoized recursion.
  double cascade_probability(int k, int n_available, int n_previous) const {
    if (n_available < 0 || n_previous < 0 || k < 0 || k > n_available)
      throw validation_error("cascade_probability: invalid state");
    return solve(k, n_available, n_previous);
  }

  /// Distribution of the number of crosstalk-added clicks seeded by
  /// `initial_clicks` light clicks, over k = 0..N-initial_clicks.
  std::vector<double> cascade_distribution(int initial_clicks) const {
    if (initial_clicks < 0 || initial_clicks > n_)
      throw validation_error("cascade_distribution: initial_clicks must be in 0..N");
    const int avail = n_ - initial_clicks;
    std::vector<double> out(static_cast<std::size_t>(avail) + 1);
    long double sum = 0.0L;
    for (int k = 0; k <= avail; ++k) {
      out[static_cast<std::size_t>(k)] = solve(k, avail, initial_clicks);
      sum += out[static_cast<std::size_t>(k)];
    }
    if (std::fabs(static_cast<double>(sum) - 1.0) > 1e-10)
      throw numeric_error("cascade_distribution: normalization drifted beyond 1e-10");
    return out;
  }

  /// Pre-populate every state reachable from seeds up to max_initial_clicks.
  void warm_up(int max_initial_clicks) const {
    for (int a0 = 0; a0 <= max_initial_clicks && a0 <= n_; ++a0)
      (void)cascade_distribution(a0);
  }

  std::size_t table_size() const {
    return use_dense_ ? dense_filled_ : memo_.size();
  }

private:
  static constexpr std::size_t kDenseLimit = 8u * 1024u * 1024u;

  double solve(int k, int avail, int prev) const {
    if (k == 0) {
      return pw_[static_cast<std::size_t>(prev) * static_cast<std::size_t>(avail)];
    }
    const std::size_t np1 = static_cast<std::size_t>(n_) + 1;
    const std::size_t idx =
        (static_cast<std::size_t>(k) * np1 + static_cast<std::size_t>(avail)) * np1 +
        static_cast<std::size_t>(prev);
    if (use_dense_) {
      const double cached = dense_[idx];
      if (cached >= 0.0) return cached;
    } else {
      auto it = memo_.find(idx);
      if (it != memo_.end()) return it->second;
    }

    const double p = om_[static_cast<std::size_t>(prev)];
    long double acc = 0.0L;
    double pj = 1.0;
    for (int j = 1; j <= k; ++j) {
      pj *= p;
      const double gen_j =
          static_cast<double>((*pascal_)(avail, j)) * pj *
          pw_[static_cast<std::size_t>(prev) * static_cast<std::size_t>(avail - j)];
      acc += static_cast<long double>(gen_j) * solve(k - j, avail - j, j);
    }
    const double v = static_cast<double>(acc);
    if (use_dense_) {
      dense_[idx] = v;
      ++dense_filled_;
    } else {
      memo_.emplace(idx, v);
    }
    return v;
  }

  double chi_;
  int n_;
  std::vector<double> pw_; ///< (1-chi)^m
  std::vector<double> om_; ///< 1-(1-chi)^m, full relative precision at small chi
  std::shared_ptr<detail::PascalTable> pascal_;
  bool use_dense_ = false;
  mutable std::vector<double> dense_;
  mutable std::size_t dense_filled_ = 0;
  mutable std::unordered_map<std::size_t, double> memo_;
};

/// Convenience wrapper: cascade distribution for a detector configuration.
inline std::vector<double> cascade_distribution(int initial_clicks,
                                                const DetectorConfig& det) {
  det.validate();
  CrosstalkKernel kernel(det.crosstalk, det.n_pixels);
  return kernel.cascade_distribution(initial_clicks);
}

/// Discrete convolution of a click distribution with an independent noise
/// distribution, truncated at N. Mass that would land beyond N indicates an
/// inconsistent noise model and raises an error.
inline ClickDistribution convolve_noise(const ClickDistribution& light,
                                        const std::vector<double>& noise) {
  light.validate(1e-8);
  long double noise_sum = 0.0L;
  for (double p : noise) {
    if (!(p >= 0.0))
      throw validation_error("convolve_noise: noise entries must be >= 0");
    noise_sum += p;
  }
  if (std::fabs(static_cast<double>(noise_sum) - 1.0) > 1e-8)
    throw validation_error("convolve_noise: noise distribution must be normalized");

  const int n = light.n_pixels;
  ClickDistribution out;
  out.n_pixels = n;
  out.probs.assign(static_cast<std::size_t>(n) + 1, 0.0);
  long double beyond = 0.0L;
  for (std::size_t i = 0; i < light.probs.size(); ++i) {
    for (std::size_t j = 0; j < noise.size(); ++j) {
      const double m = light.probs[i] * noise[j];
      const std::size_t k = i + j;
      if (k <= static_cast<std::size_t>(n))
        out.probs[k] += m;
      else
        beyond += m;
    }
  }
  if (static_cast<double>(beyond) > 1e-12)
    throw model_error("convolve_noise: combined mass of " +
                      std::to_string(static_cast<double>(beyond)) +
                      " beyond the pixel count");
  return out;
}

/// Click distribution including crosstalk cascades: every primary click
/// (light- or dark-seeded, since dark counts are folded into the ideal
/// distribution) seeds cascades with the kernel's chi. With zero light
/// clicks nothing can cascade, so c_0 is the ideal c_0.
inline ClickDistribution click_distribution_with_crosstalk(
    const PhotonSource& source, const DetectorConfig& det,
    const CrosstalkKernel& kernel) {
  if (kernel.n_pixels() != det.n_pixels)
    throw validation_error("click_distribution_with_crosstalk: kernel/detector pixel mismatch");
  ClickDistribution light = click_distribution(source, det);
  if (kernel.chi() == 0.0) return light;

  const int n = det.n_pixels;
  ClickDistribution out;
  out.n_pixels = n;
  out.probs.assign(static_cast<std::size_t>(n) + 1, 0.0);
  for (int k = 0; k <= n; ++k) {
    const double w = light.probs[static_cast<std::size_t>(k)];
    if (w == 0.0) continue;
    const auto casc = kernel.cascade_distribution(k);
    for (std::size_t j = 0; j < casc.size(); ++j)
      out.probs[static_cast<std::size_t>(k) + j] += w * casc[j];
  }
  long double sum = 0.0L;
  for (double p : out.probs) sum += p;
  if (std::fabs(static_cast<double>(sum) - 1.0) > 1e-10)
    throw numeric_error("click_distribution_with_crosstalk: normalization drifted");
  return out;
}

inline ClickDistribution click_distribution_with_crosstalk(
    const PhotonSource& source, const DetectorConfig& det) {
  det.validate();
  if (det.crosstalk == 0.0) return click_distribution(source, det);
  CrosstalkKernel kernel(det.crosstalk, det.n_pixels);
  return click_distribution_with_crosstalk(source, det, kernel);
}

} // namespace clickstat
