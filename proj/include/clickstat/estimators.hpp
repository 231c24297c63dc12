// ============================================================================
// estimators.hpp -- moments, Q nonclassicality parameters with uncertainty,
// crosstalk extraction from the zero-intensity Q limit, and the deliberately
// unconstrained click-to-photon inversion.
// ============================================================================
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "clickstat/crosstalk.hpp"
#include "clickstat/detail/numeric.hpp"
#include "clickstat/rng.hpp"
#include "clickstat/types.hpp"

namespace clickstat {

namespace detail {

inline double q_binomial_from_moments(double mean, double variance, int n_pixels) {
  if (!(mean > 0.0) || !(mean < static_cast<double>(n_pixels)))
    throw undefined_q_error("q_binomial: undefined for mean click number " +
                            std::to_string(mean) + " with N = " +
                            std::to_string(n_pixels));
  const double denom = mean * (1.0 - mean / static_cast<double>(n_pixels));
  return variance / denom - 1.0;
}

inline double q_mandel_from_moments(double mean, double variance) {
  if (!(mean > 0.0))
    throw undefined_q_error("q_mandel: undefined for zero mean");
  return variance / mean - 1.0;
}

} // namespace detail

/// Binomial Q of an exact distribution: Var / (<c>(1 - <c>/N)) - 1.
/// Zero for any binomial distribution, negative only for nonclassical input.
inline double q_binomial(const ClickDistribution& dist) {
  return detail::q_binomial_from_moments(dist.mean(), dist.variance(), dist.n_pixels);
}

/// Binomial Q of an empirical sample (unbiased variance estimator).
inline double q_binomial(const ClickSample& sample) {
  return detail::q_binomial_from_moments(sample.mean(), sample.variance(),
                                         sample.n_pixels());
}

/// Mandel Q applied to click numbers as if they were photon numbers. For
/// coherent light this is spuriously negative with magnitude exp(-mu/N) - 1.
inline double q_mandel(const ClickDistribution& dist) {
  return detail::q_mandel_from_moments(dist.mean(), dist.variance());
}

inline double q_mandel(const ClickSample& sample) {
  return detail::q_mandel_from_moments(sample.mean(), sample.variance());
}

enum class UncertaintyMethod { Analytic, Bootstrap, Delta };

inline const char* to_string(UncertaintyMethod m) {
  switch (m) {
    case UncertaintyMethod::Analytic: return "analytic";
    case UncertaintyMethod::Bootstrap: return "bootstrap";
    case UncertaintyMethod::Delta: return "delta";
  }
  return "?";
}

struct QReport {
  double q_binomial = 0.0;
  double q_mandel = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  std::optional<double> q_binomial_stderr;
  std::optional<double> q_mandel_stderr;
  UncertaintyMethod method = UncertaintyMethod::Analytic;
};

/// Q report for an exact distribution; no standard errors apply.
inline QReport q_report(const ClickDistribution& dist) {
  QReport r;
  r.mean = dist.mean();
  r.variance = dist.variance();
  r.q_binomial = q_binomial(dist);
  r.q_mandel = q_mandel(dist);
  r.method = UncertaintyMethod::Analytic;
  return r;
}

namespace detail {

/// Multinomial resample of a histogram by sequential conditional binomials.
template <class Rng>
inline std::vector<std::uint64_t> multinomial_resample(
    const std::vector<double>& probs, std::uint64_t n, Rng& rng) {
  std::vector<std::uint64_t> out(probs.size(), 0);
  std::uint64_t remaining = n;
  double mass_left = 1.0;
  for (std::size_t k = 0; k + 1 < probs.size() && remaining > 0; ++k) {
    double p = probs[k] / mass_left;
    if (p > 1.0) p = 1.0;
    if (p < 0.0) p = 0.0;
    std::binomial_distribution<std::uint64_t> bin(remaining, p);
    const std::uint64_t c = (p >= 1.0) ? remaining : bin(rng);
    out[k] = c;
    remaining -= c;
    mass_left -= probs[k];
    if (mass_left <= 0.0) break;
  }
  out.back() += remaining;
  return out;
}

} // namespace detail

/// Standard errors for Q_B and Q_M of an empirical sample.
///
/// Bootstrap resamples the multinomial click histogram with per-resample
/// Philox substreams (deterministic for a fixed seed, independent of any
/// parallel scheduling). The delta method propagates the multinomial
/// covariance through the Q formulas instead.
inline QReport q_uncertainty(const ClickSample& sample, UncertaintyMethod method,
                             int n_resamples = 2000, std::uint64_t seed = 0) {
  sample.validate();
  QReport r;
  r.mean = sample.mean();
  r.variance = sample.variance();
  r.q_binomial = q_binomial(sample); // throws for degenerate samples
  r.q_mandel = q_mandel(sample);
  r.method = method;

  const int n_pix = sample.n_pixels();
  const auto freq = sample.frequencies();

  if (method == UncertaintyMethod::Bootstrap) {
    if (sample.n_trials < 100)
      throw validation_error("q_uncertainty: bootstrap needs n_trials >= 100");
    if (n_resamples < 2)
      throw validation_error("q_uncertainty: need at least 2 resamples");
    long double qb_sum = 0.0L, qb_sq = 0.0L, qm_sum = 0.0L, qm_sq = 0.0L;
    long long valid = 0;
    for (int b = 0; b < n_resamples; ++b) {
      Philox rng(seed, static_cast<std::uint64_t>(b));
      ClickSample rs;
      rs.counts = detail::multinomial_resample(freq, sample.n_trials, rng);
      rs.n_trials = sample.n_trials;
      const double m = rs.mean();
      if (!(m > 0.0) || !(m < static_cast<double>(n_pix))) continue; // degenerate resample
      const double v = rs.variance();
      const double qb = detail::q_binomial_from_moments(m, v, n_pix);
      const double qm = detail::q_mandel_from_moments(m, v);
      qb_sum += qb;
      qb_sq += static_cast<long double>(qb) * qb;
      qm_sum += qm;
      qm_sq += static_cast<long double>(qm) * qm;
      ++valid;
    }
    if (valid < 2)
      throw numeric_error("q_uncertainty: too many degenerate bootstrap resamples");
    const long double nb = static_cast<long double>(valid);
    const long double qb_var = (qb_sq - qb_sum * qb_sum / nb) / (nb - 1.0L);
    const long double qm_var = (qm_sq - qm_sum * qm_sum / nb) / (nb - 1.0L);
    r.q_binomial_stderr = std::sqrt(std::max(0.0, static_cast<double>(qb_var)));
    r.q_mandel_stderr = std::sqrt(std::max(0.0, static_cast<double>(qm_var)));
    return r;
  }

  if (method == UncertaintyMethod::Delta) {
    // gradients of Q wrt the cell probabilities, then g' Sigma g with the
    // multinomial covariance (diag(p) - p p') / n
    const double n_d = static_cast<double>(sample.n_trials);
    const double m1 = r.mean;
    double m2 = 0.0;
    for (std::size_t k = 0; k < freq.size(); ++k)
      m2 += static_cast<double>(k) * static_cast<double>(k) * freq[k];
    const double var_b = m2 - m1 * m1; // biased variance for the expansion
    const double n_pix_d = static_cast<double>(n_pix);

    auto propagate = [&](auto grad) {
      long double gp = 0.0L, gp2 = 0.0L;
      for (std::size_t k = 0; k < freq.size(); ++k) {
        const double g = grad(static_cast<double>(k));
        gp += static_cast<long double>(freq[k]) * g;
        gp2 += static_cast<long double>(freq[k]) * g * g;
      }
      const long double v = (gp2 - gp * gp) / n_d;
      return std::sqrt(std::max(0.0, static_cast<double>(v)));
    };

    const double denom_b = m1 * (1.0 - m1 / n_pix_d);
    r.q_binomial_stderr = propagate([&](double k) {
      const double dv = k * k - 2.0 * m1 * k;
      const double dd = k * (1.0 - 2.0 * m1 / n_pix_d);
      return (dv * denom_b - var_b * dd) / (denom_b * denom_b);
    });
    r.q_mandel_stderr = propagate([&](double k) {
      const double dv = k * k - 2.0 * m1 * k;
      return (dv * m1 - var_b * k) / (m1 * m1);
    });
    return r;
  }

  throw validation_error("q_uncertainty: method must be bootstrap or delta");
}

/// Zero-intensity limit of the Mandel (equivalently binomial) Q parameter,
/// which depends on the crosstalk alone: with C_m the distribution of the
/// total click number seeded by a single light click,
/// lim Q = sum m^2 C_m / sum m C_m - 1.
inline double crosstalk_q_limit(double chi, int n_pixels) {
  if (n_pixels < 1)
    throw validation_error("crosstalk_q_limit: n_pixels must be >= 1");
  if (!(chi >= 0.0 && chi < 1.0))
    throw validation_error("crosstalk_q_limit: chi must be in [0, 1)");
  if (chi == 0.0 || n_pixels == 1) return 0.0;
  CrosstalkKernel kernel(chi, n_pixels);
  const auto casc = kernel.cascade_distribution(1);
  long double num = 0.0L, den = 0.0L;
  for (std::size_t j = 0; j < casc.size(); ++j) {
    const long double m = static_cast<long double>(j) + 1.0L; // seed included
    num += m * m * casc[j];
    den += m * casc[j];
  }
  return static_cast<double>(num / den - 1.0L);
}

namespace detail {

/// Safeguarded regula falsi (Illinois) on a bracketing interval.
inline double find_root_bracketed(const std::function<double(double)>& f,
                                  double lo, double hi, double f_lo, double f_hi,
                                  double xtol, int max_iter = 200) {
  double side = 0.0;
  for (int it = 0; it < max_iter && (hi - lo) > xtol; ++it) {
    double mid = (f_hi != f_lo) ? (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
                                : 0.5 * (lo + hi);
    if (!(mid > lo) || !(mid < hi)) mid = 0.5 * (lo + hi);
    const double f_mid = f(mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid > 0.0) == (f_hi > 0.0)) {
      hi = mid;
      f_hi = f_mid;
      if (side == 1.0) f_lo *= 0.5;
      side = 1.0;
    } else {
      lo = mid;
      f_lo = f_mid;
      if (side == -1.0) f_hi *= 0.5;
      side = -1.0;
    }
  }
  return 0.5 * (lo + hi);
}

} // namespace detail

/// Invert crosstalk_q_limit: find the chi in [0, 0.2] whose zero-intensity Q
/// equals the given value. Crosstalk beyond 20% is outside the intended
/// regime of the model and reported as an out-of-bracket error.
inline double extract_chi(double low_intensity_q, int n_pixels,
                          double xtol = 1e-10) {
  if (!(low_intensity_q >= 0.0))
    throw validation_error("extract_chi: low_intensity_q must be >= 0");
  if (low_intensity_q == 0.0) return 0.0;
  constexpr double kChiMax = 0.2;
  const double q_hi = crosstalk_q_limit(kChiMax, n_pixels);
  if (low_intensity_q > q_hi)
    throw bracket_error("extract_chi: target Q " + std::to_string(low_intensity_q) +
                        " above crosstalk_q_limit(0.2) = " + std::to_string(q_hi));
  auto f = [&](double chi) {
    return crosstalk_q_limit(chi, n_pixels) - low_intensity_q;
  };
  return detail::find_root_bracketed(f, 0.0, kChiMax, -low_intensity_q,
                                     q_hi - low_intensity_q, xtol);
}

// ----------------------------------------------------------------------------
// Naive click -> photon inversion
// ----------------------------------------------------------------------------

struct InversionOptions {
  int n_max = -1;             ///< truncation order; default 6 N
  double max_residual = 1e-6; ///< relative residual above which the inversion
                              ///< is reported as ill-posed
};

class inversion_error : public numeric_error {
public:
  inversion_error(const std::string& msg, double condition_number)
      : numeric_error(msg), condition_number(condition_number) {}
  double condition_number;
};

struct InversionResult {
  std::vector<double> photon_probs; ///< p_0..p_n_max, signed
  double total_mass = 0.0;
  double min_prob = 0.0;
  double condition_number = 0.0;
  double residual = 0.0; ///< relative residual of the least-squares solve
};

namespace detail {

/// Conditional click matrix M[k][n] = P(k clicks | n photons) under the
/// uniform ball-into-bins model with per-photon detection efficiency eta.
inline Eigen::MatrixXd click_given_photons_matrix(int n_pixels, double eta,
                                                  int n_max) {
  const auto occ = occupancy_table(n_max, n_pixels);
  Eigen::MatrixXd m(n_pixels + 1, n_max + 1);
  for (int n = 0; n <= n_max; ++n) {
    if (eta >= 1.0) {
      for (int k = 0; k <= n_pixels; ++k)
        m(k, n) = occ[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)];
      continue;
    }
    const auto surv = binomial_pmf(n, eta);
    for (int k = 0; k <= n_pixels; ++k) {
      double acc = 0.0;
      for (int d = 0; d <= n; ++d)
        acc += surv[static_cast<std::size_t>(d)] *
               occ[static_cast<std::size_t>(d)][static_cast<std::size_t>(k)];
      m(k, n) = acc;
    }
  }
  return m;
}

inline InversionResult invert_clicks(const std::vector<double>& clicks,
                                     const DetectorConfig& det,
                                     InversionOptions opt) {
  det.validate();
  const int n_pixels = det.n_pixels;
  if (clicks.size() != static_cast<std::size_t>(n_pixels) + 1)
    throw validation_error("naive_photon_inversion: click vector must have N + 1 entries");
  const int n_max = opt.n_max < 0 ? 6 * n_pixels : opt.n_max;
  if (n_max < 0)
    throw validation_error("naive_photon_inversion: n_max must be >= 0");

  const Eigen::MatrixXd m = click_given_photons_matrix(n_pixels, det.efficiency, n_max);
  Eigen::VectorXd c(n_pixels + 1);
  for (int k = 0; k <= n_pixels; ++k) c(k) = clicks[static_cast<std::size_t>(k)];

  // basic least-squares solution via rank-revealing QR: the naive solve a
  // practitioner would reach for, with no regularization beyond the rank
  // decision
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  const Eigen::VectorXd p = qr.solve(c);
  const Eigen::Index rank = qr.rank();
  const auto& r_diag = qr.matrixR();
  const double cond =
      std::fabs(r_diag(0, 0)) / std::max(std::fabs(r_diag(rank - 1, rank - 1)), 1e-300);

  const double rel_residual = (m * p - c).norm() / std::max(c.norm(), 1e-300);
  if (rel_residual > opt.max_residual)
    throw inversion_error(
        "naive_photon_inversion: ill-posed inversion, relative residual " +
            std::to_string(rel_residual) + " with condition number " +
            std::to_string(cond),
        cond);

  InversionResult r;
  r.photon_probs.assign(p.data(), p.data() + p.size());
  r.condition_number = cond;
  r.residual = rel_residual;
  long double mass = 0.0L;
  double mn = r.photon_probs.empty() ? 0.0 : r.photon_probs[0];
  for (double v : r.photon_probs) {
    mass += v;
    if (v < mn) mn = v;
  }
  r.total_mass = static_cast<double>(mass);
  r.min_prob = mn;
  return r;
}

} // namespace detail

/// Least-squares click -> photon-number inversion with no nonnegativity
/// constraint. Outside the small-photon-number-per-pixel regime the result
/// acquires materially negative entries; that failure is the point of the
/// diagnostic, so the sign is preserved and reported.
inline InversionResult naive_photon_inversion(const ClickDistribution& dist,
                                              const DetectorConfig& det,
                                              InversionOptions opt = {}) {
  dist.validate(1e-8);
  return detail::invert_clicks(dist.probs, det, opt);
}

inline InversionResult naive_photon_inversion(const ClickSample& sample,
                                              const DetectorConfig& det,
                                              InversionOptions opt = {}) {
  sample.validate();
  return detail::invert_clicks(sample.frequencies(), det, opt);
}

} // namespace clickstat
