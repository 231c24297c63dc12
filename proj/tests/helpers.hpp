// Shared test oracles: brute-force enumerations, quadrature, and statistics
// helpers. These stay independent of the library's computation paths.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "clickstat/crosstalk.hpp"
#include "clickstat/types.hpp"

namespace testutil {

/// Total-variation distance between a distribution and observed frequencies.
inline double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::fabs(p[i] - q[i]);
  return 0.5 * acc;
}

/// Per-bin |f - p| <= 3 sqrt(p(1-p)/n) check, returning the worst z-score.
inline double worst_bin_z(const std::vector<double>& probs,
                          const std::vector<std::uint64_t>& counts,
                          std::uint64_t n) {
  double worst = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double p = probs[k];
    const double f = static_cast<double>(counts[k]) / static_cast<double>(n);
    const double sigma = std::sqrt(std::max(p * (1.0 - p) / static_cast<double>(n), 1e-300));
    const double z = std::fabs(f - p) / sigma;
    if (z > worst) worst = z;
  }
  return worst;
}

/// Explicit sum over all compositions (ordered positive parts) of k: the
/// exponential-time oracle for the cascade recursion. Each composition
/// (a_1..a_g) contributes the product of one-generation probabilities plus
/// the terminating empty generation.
inline double cascade_by_composition_enumeration(int k, int n_available,
                                                 int n_previous, double chi) {
  if (k == 0) return clickstat::crosstalk_generation(0, n_available, n_previous, chi);
  double total = 0.0;
  // first part j, then enumerate the rest recursively; this expands every
  // composition exactly once with no shared state
  for (int j = 1; j <= k && j <= n_available; ++j) {
    const double gen = clickstat::crosstalk_generation(j, n_available, n_previous, chi);
    total += gen * cascade_by_composition_enumeration(k - j, n_available - j, j, chi);
  }
  return total;
}

/// Composite Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int n_intervals) {
  if (n_intervals % 2 != 0) ++n_intervals;
  const double h = (b - a) / n_intervals;
  double acc = f(a) + f(b);
  for (int i = 1; i < n_intervals; ++i)
    acc += f(a + i * h) * ((i % 2 == 1) ? 4.0 : 2.0);
  return acc * h / 3.0;
}

/// Exact binomial click distribution built directly, for oracle use.
inline clickstat::ClickDistribution binomial_distribution_vector(int n, double p) {
  clickstat::ClickDistribution d;
  d.n_pixels = n;
  d.probs.resize(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    double c = 1.0;
    for (int i = 0; i < k; ++i) c *= static_cast<double>(n - i) / (i + 1);
    d.probs[static_cast<std::size_t>(k)] =
        c * std::pow(p, k) * std::pow(1.0 - p, n - k);
  }
  return d;
}

} // namespace testutil
