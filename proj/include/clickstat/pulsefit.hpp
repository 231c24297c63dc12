// ============================================================================
// pulsefit.hpp -- decomposition of pulse-area (AuP) histograms into click
// statistics via a Gaussian mixture with arithmetically constrained peaks:
// peak i sits at x0 + i*delta_x with variance sigma0^2 + i*sigma1^2.
//
// Fitting alternates (a) nonnegative least squares for the amplitudes with
// the shape parameters held fixed and (b) a damped Gauss-Newton refinement
// of (delta_x, x0, sigma0, sigma1) on the weighted residual.
// ============================================================================
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "clickstat/detail/nnls.hpp"
#include "clickstat/detail/numeric.hpp"
#include "clickstat/types.hpp"

namespace clickstat {

/// Binned pulse-area data in arbitrary area units.
struct AuPHistogram {
  std::vector<double> bin_edges;    ///< size n_bins + 1, strictly increasing
  std::vector<std::int64_t> counts; ///< size n_bins
  std::int64_t n_samples = 0;

  int n_bins() const { return static_cast<int>(counts.size()); }
  double center(int b) const { return 0.5 * (bin_edges[b] + bin_edges[b + 1]); }
  double width(int b) const { return bin_edges[b + 1] - bin_edges[b]; }
  double mean_width() const {
    return (bin_edges.back() - bin_edges.front()) / static_cast<double>(n_bins());
  }

  void validate() const {
    if (counts.empty() || bin_edges.size() != counts.size() + 1)
      throw validation_error("AuPHistogram: need n_bins + 1 edges");
    for (std::size_t b = 0; b + 1 < bin_edges.size(); ++b)
      if (!(bin_edges[b] < bin_edges[b + 1]))
        throw validation_error("AuPHistogram: bin edges must be strictly increasing");
    std::int64_t total = 0;
    for (auto c : counts) {
      if (c < 0) throw validation_error("AuPHistogram: counts must be >= 0");
      total += c;
    }
    if (total != n_samples)
      throw validation_error("AuPHistogram: counts must sum to n_samples");
  }
};

/// Bin a sample vector. n_bins <= 0 selects the bin count by the
/// Freedman-Diaconis rule.
inline AuPHistogram make_histogram(const std::vector<double>& samples,
                                   int n_bins = 0) {
  if (samples.empty())
    throw validation_error("make_histogram: no samples");
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted.front();
  const double hi = sorted.back();

  if (n_bins <= 0) {
    const std::size_t n = sorted.size();
    const double q25 = sorted[static_cast<std::size_t>(0.25 * (n - 1))];
    const double q75 = sorted[static_cast<std::size_t>(0.75 * (n - 1))];
    const double iqr = q75 - q25;
    const double h = 2.0 * iqr / std::cbrt(static_cast<double>(n));
    if (h > 0.0 && hi > lo)
      n_bins = static_cast<int>(std::ceil((hi - lo) / h));
    else
      n_bins = 1;
    n_bins = std::clamp(n_bins, 1, 200000);
  }

  AuPHistogram hist;
  const double span = (hi > lo) ? (hi - lo) : std::max(1.0, std::fabs(hi));
  const double w = span / n_bins;
  hist.bin_edges.resize(static_cast<std::size_t>(n_bins) + 1);
  for (int b = 0; b <= n_bins; ++b) hist.bin_edges[static_cast<std::size_t>(b)] = lo + b * w;
  hist.counts.assign(static_cast<std::size_t>(n_bins), 0);
  for (double x : samples) {
    int b = static_cast<int>((x - lo) / w);
    b = std::clamp(b, 0, n_bins - 1);
    ++hist.counts[static_cast<std::size_t>(b)];
  }
  hist.n_samples = static_cast<std::int64_t>(samples.size());
  return hist;
}

/// Parameters and state of a Gaussian-mixture decomposition.
struct GaussianMixtureFit {
  double delta_x = 1.0; ///< peak spacing (gain)
  double x0 = 0.0;      ///< zero-click offset
  double sigma0 = 1.0;  ///< electronic-noise width
  double sigma1 = 0.0;  ///< per-click width
  std::vector<double> amplitudes; ///< A_0..A_N, nonnegative weights
  double residual_norm = 0.0;     ///< weighted residual of the last evaluation
  bool converged = false;
  int n_iterations = 0;

  int max_order() const { return static_cast<int>(amplitudes.size()) - 1; }
  double peak_center(int i) const { return x0 + i * delta_x; }
  double peak_sigma(int i) const {
    return std::sqrt(sigma0 * sigma0 + i * sigma1 * sigma1);
  }

  void validate() const {
    if (!(delta_x > 0.0) || !(sigma0 > 0.0) || !(sigma1 >= 0.0))
      throw validation_error("GaussianMixtureFit: require delta_x > 0, sigma0 > 0, sigma1 >= 0");
    if (amplitudes.empty())
      throw validation_error("GaussianMixtureFit: no amplitudes");
    for (double a : amplitudes)
      if (!(a >= 0.0))
        throw validation_error("GaussianMixtureFit: amplitudes must be >= 0");
  }
};

/// Initialization could not find usable structure in the histogram.
class initialization_error : public numeric_error {
public:
  using numeric_error::numeric_error;
};

/// Fit diverged; carries the best state reached.
class fit_failure : public numeric_error {
public:
  fit_failure(const std::string& msg, GaussianMixtureFit best)
      : numeric_error(msg), best(std::move(best)) {}
  GaussianMixtureFit best;
};

/// Mixture density at x. Gaussians are normalized (1/sqrt(2 pi) included) so
/// the amplitudes are directly interpretable as probability weights.
inline double mixture_model(double x, const GaussianMixtureFit& fit) {
  fit.validate();
  double f = 0.0;
  for (int i = 0; i <= fit.max_order(); ++i) {
    const double a = fit.amplitudes[static_cast<std::size_t>(i)];
    if (a == 0.0) continue;
    const double s = fit.peak_sigma(i);
    const double z = (x - fit.peak_center(i)) / s;
    if (std::fabs(z) > 40.0) continue;
    f += a * detail::normal_pdf(z) / s;
  }
  return f;
}

/// Mass of peak i that spills beyond the midpoints to its neighbors; a
/// diagnostic for where single-shot click resolution ends.
inline std::vector<double> peak_overlaps(const GaussianMixtureFit& fit) {
  std::vector<double> out(fit.amplitudes.size());
  for (int i = 0; i <= fit.max_order(); ++i) {
    const double s = fit.peak_sigma(i);
    out[static_cast<std::size_t>(i)] =
        std::erfc(0.5 * fit.delta_x / (s * std::sqrt(2.0)));
  }
  return out;
}

namespace detail {

/// Local maxima of the lightly smoothed count vector that rise above a small
/// fraction of the global maximum.
inline std::vector<int> significant_maxima(const AuPHistogram& hist) {
  const int nb = hist.n_bins();
  std::vector<double> s(static_cast<std::size_t>(nb));
  for (int b = 0; b < nb; ++b) {
    double acc = static_cast<double>(hist.counts[static_cast<std::size_t>(b)]);
    int cnt = 1;
    if (b > 0) { acc += static_cast<double>(hist.counts[static_cast<std::size_t>(b - 1)]); ++cnt; }
    if (b + 1 < nb) { acc += static_cast<double>(hist.counts[static_cast<std::size_t>(b + 1)]); ++cnt; }
    s[static_cast<std::size_t>(b)] = acc / cnt;
  }
  const double peak = *std::max_element(s.begin(), s.end());
  const double floor = std::max(3.0, 0.02 * peak);
  std::vector<int> maxima;
  for (int b = 1; b + 1 < nb; ++b) {
    if (s[static_cast<std::size_t>(b)] >= floor &&
        s[static_cast<std::size_t>(b)] > s[static_cast<std::size_t>(b - 1)] &&
        s[static_cast<std::size_t>(b)] >= s[static_cast<std::size_t>(b + 1)])
      maxima.push_back(b);
  }
  return maxima;
}

/// Period of the histogram in bins from the first meaningful autocorrelation
/// maximum, parabolic-refined. Returns 0 when no periodic structure stands
/// out.
inline double autocorrelation_period(const AuPHistogram& hist) {
  const int nb = hist.n_bins();
  if (nb < 6) return 0.0;
  double mean = 0.0;
  for (auto c : hist.counts) mean += static_cast<double>(c);
  mean /= nb;
  std::vector<double> d(static_cast<std::size_t>(nb));
  for (int b = 0; b < nb; ++b)
    d[static_cast<std::size_t>(b)] = static_cast<double>(hist.counts[static_cast<std::size_t>(b)]) - mean;

  const int max_lag = nb / 2;
  std::vector<double> ac(static_cast<std::size_t>(max_lag) + 1, 0.0);
  for (int lag = 0; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (int b = 0; b + lag < nb; ++b)
      acc += d[static_cast<std::size_t>(b)] * d[static_cast<std::size_t>(b + lag)];
    ac[static_cast<std::size_t>(lag)] = acc;
  }
  // strongest local maximum away from lag 0
  int best = 0;
  for (int lag = 2; lag < max_lag; ++lag) {
    if (ac[static_cast<std::size_t>(lag)] > ac[static_cast<std::size_t>(lag - 1)] &&
        ac[static_cast<std::size_t>(lag)] >= ac[static_cast<std::size_t>(lag + 1)] &&
        (best == 0 || ac[static_cast<std::size_t>(lag)] > ac[static_cast<std::size_t>(best)]))
      best = lag;
  }
  if (best == 0 || ac[static_cast<std::size_t>(best)] < 0.05 * ac[0]) return 0.0;
  // parabolic refinement around the discrete maximum
  const double y0 = ac[static_cast<std::size_t>(best) - 1];
  const double y1 = ac[static_cast<std::size_t>(best)];
  const double y2 = ac[static_cast<std::size_t>(best) + 1];
  const double denom = y0 - 2.0 * y1 + y2;
  double shift = 0.0;
  if (denom < 0.0) shift = 0.5 * (y0 - y2) / denom;
  return static_cast<double>(best) + std::clamp(shift, -0.5, 0.5);
}

/// Centroid and width of the peak around bin b0, using a window of roughly
/// one period.
inline void peak_moments(const AuPHistogram& hist, int b0, double window,
                         double* center, double* sigma) {
  const double c0 = hist.center(b0);
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (int b = 0; b < hist.n_bins(); ++b) {
    const double xc = hist.center(b);
    if (std::fabs(xc - c0) > 0.5 * window) continue;
    const double cnt = static_cast<double>(hist.counts[static_cast<std::size_t>(b)]);
    m0 += cnt;
    m1 += cnt * xc;
    m2 += cnt * xc * xc;
  }
  if (m0 <= 0.0) {
    *center = c0;
    *sigma = hist.mean_width();
    return;
  }
  const double mu = m1 / m0;
  const double w = hist.mean_width();
  double var = m2 / m0 - mu * mu - w * w / 12.0; // Sheppard correction
  if (var < w * w / 16.0) var = w * w / 16.0;
  *center = mu;
  *sigma = std::sqrt(var);
}

} // namespace detail

/// Initial fit parameters with a caller-supplied peak spacing.
inline GaussianMixtureFit initialize_fit(const AuPHistogram& hist, int n_pixels,
                                         double delta_x) {
  hist.validate();
  if (n_pixels < 1)
    throw validation_error("initialize_fit: n_pixels must be >= 1");
  if (hist.n_samples == 0)
    throw initialization_error("initialize_fit: empty histogram");
  if (!(delta_x > 0.0))
    throw validation_error("initialize_fit: delta_x must be > 0");

  const auto maxima = detail::significant_maxima(hist);
  const int b1 = maxima.empty()
                     ? static_cast<int>(std::max_element(hist.counts.begin(), hist.counts.end()) -
                                        hist.counts.begin())
                     : maxima.front();
  double p1 = 0.0, sigma0 = 0.0;
  detail::peak_moments(hist, b1, delta_x, &p1, &sigma0);

  GaussianMixtureFit fit;
  fit.delta_x = delta_x;
  // phase convention: the offset lies within half a spacing of zero, which
  // fixes the absolute click index of every peak
  fit.x0 = p1 - std::round(p1 / delta_x) * delta_x;
  fit.sigma0 = sigma0;
  fit.sigma1 = 0.0037 * delta_x;
  fit.amplitudes.assign(static_cast<std::size_t>(n_pixels) + 1, 0.0);
  for (int b = 0; b < hist.n_bins(); ++b) {
    const double xc = hist.center(b);
    const int i = static_cast<int>(std::round((xc - fit.x0) / delta_x));
    if (i < 0 || i > n_pixels) continue;
    fit.amplitudes[static_cast<std::size_t>(i)] +=
        static_cast<double>(hist.counts[static_cast<std::size_t>(b)]) /
        static_cast<double>(hist.n_samples);
  }
  return fit;
}

/// Initial fit parameters; the peak spacing is estimated from the dominant
/// nonzero autocorrelation period of the histogram, falling back to the
/// median spacing of detected maxima, then to a declared single-peak layout.
inline GaussianMixtureFit initialize_fit(const AuPHistogram& hist, int n_pixels) {
  hist.validate();
  if (n_pixels < 1)
    throw validation_error("initialize_fit: n_pixels must be >= 1");
  if (hist.n_samples == 0)
    throw initialization_error("initialize_fit: empty histogram");

  const double period_bins = detail::autocorrelation_period(hist);
  if (period_bins > 0.0)
    return initialize_fit(hist, n_pixels, period_bins * hist.mean_width());

  const auto maxima = detail::significant_maxima(hist);
  if (maxima.size() >= 2) {
    std::vector<double> spacings;
    for (std::size_t i = 1; i < maxima.size(); ++i)
      spacings.push_back(hist.center(maxima[i]) - hist.center(maxima[i - 1]));
    std::sort(spacings.begin(), spacings.end());
    const double dx = spacings[spacings.size() / 2];
    if (dx > 0.0) return initialize_fit(hist, n_pixels, dx);
  }
  if (maxima.size() == 1) {
    // single resolvable peak: place it at index 0 and push the others
    // beyond the data so the amplitude solve can zero them
    double p1 = 0.0, sigma0 = 0.0;
    const double span = hist.bin_edges.back() - hist.bin_edges.front();
    detail::peak_moments(hist, maxima.front(), span, &p1, &sigma0);
    GaussianMixtureFit fit;
    fit.delta_x = std::max(8.0 * sigma0, span);
    fit.x0 = p1;
    fit.sigma0 = sigma0;
    fit.sigma1 = 0.0037 * fit.delta_x;
    fit.amplitudes.assign(static_cast<std::size_t>(n_pixels) + 1, 0.0);
    fit.amplitudes[0] = 1.0;
    return fit;
  }
  throw initialization_error(
      "initialize_fit: no periodic structure detected; supply delta_x manually");
}

struct FitOptions {
  int max_outer_iterations = 200;
  double rel_tol = 1e-8; ///< relative residual change declaring convergence
  int max_step_halvings = 30;
};

namespace detail {

struct FitEvaluation {
  Eigen::MatrixXd design; ///< weighted per-bin peak masses, scaled by n
  Eigen::VectorXd target; ///< weighted counts
};

/// Per-bin integrated (or midpoint, for fine bins) peak masses, weighted by
/// 1/sqrt(count). Bin integration is used whenever bins are coarser than
/// sigma0/4.
inline FitEvaluation evaluate_design(const AuPHistogram& hist,
                                     const GaussianMixtureFit& fit) {
  const int nb = hist.n_bins();
  const int n_peaks = fit.max_order() + 1;
  FitEvaluation ev;
  ev.design = Eigen::MatrixXd::Zero(nb, n_peaks);
  ev.target.resize(nb);
  const double n_total = static_cast<double>(hist.n_samples);

  std::vector<double> wgt(static_cast<std::size_t>(nb));
  for (int b = 0; b < nb; ++b) {
    const double cnt = static_cast<double>(hist.counts[static_cast<std::size_t>(b)]);
    wgt[static_cast<std::size_t>(b)] = 1.0 / std::sqrt(std::max(cnt, 1.0));
    ev.target(b) = cnt * wgt[static_cast<std::size_t>(b)];
  }

  const bool integrated = hist.mean_width() > fit.sigma0 / 4.0;
  for (int i = 0; i < n_peaks; ++i) {
    const double mu = fit.peak_center(i);
    const double s = fit.peak_sigma(i);
    const double x_lo = mu - 10.0 * s, x_hi = mu + 10.0 * s;
    const int b_lo = static_cast<int>(
        std::lower_bound(hist.bin_edges.begin(), hist.bin_edges.end(), x_lo) -
        hist.bin_edges.begin());
    const int b_hi = static_cast<int>(
        std::lower_bound(hist.bin_edges.begin(), hist.bin_edges.end(), x_hi) -
        hist.bin_edges.begin());
    for (int b = std::max(0, b_lo - 1); b < std::min(nb, b_hi + 1); ++b) {
      double mass;
      if (integrated) {
        const double z_hi = (hist.bin_edges[static_cast<std::size_t>(b) + 1] - mu) / s;
        const double z_lo = (hist.bin_edges[static_cast<std::size_t>(b)] - mu) / s;
        mass = normal_cdf(z_hi) - normal_cdf(z_lo);
      } else {
        const double z = (hist.center(b) - mu) / s;
        mass = normal_pdf(z) / s * hist.width(b);
      }
      ev.design(b, i) = n_total * mass * wgt[static_cast<std::size_t>(b)];
    }
  }
  return ev;
}

/// Jacobian of the weighted residual wrt (delta_x, x0, sigma0, sigma1) with
/// the amplitudes held fixed.
inline Eigen::MatrixXd shape_jacobian(const AuPHistogram& hist,
                                      const GaussianMixtureFit& fit) {
  const int nb = hist.n_bins();
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(nb, 4);
  const double n_total = static_cast<double>(hist.n_samples);
  const bool integrated = hist.mean_width() > fit.sigma0 / 4.0;

  for (int i = 0; i <= fit.max_order(); ++i) {
    const double a = fit.amplitudes[static_cast<std::size_t>(i)];
    if (a == 0.0) continue;
    const double mu = fit.peak_center(i);
    const double s = fit.peak_sigma(i);
    const double ds_dsigma0 = fit.sigma0 / s;
    const double ds_dsigma1 = i * fit.sigma1 / s;
    const double x_lo = mu - 10.0 * s, x_hi = mu + 10.0 * s;
    const int b_lo = static_cast<int>(
        std::lower_bound(hist.bin_edges.begin(), hist.bin_edges.end(), x_lo) -
        hist.bin_edges.begin());
    const int b_hi = static_cast<int>(
        std::lower_bound(hist.bin_edges.begin(), hist.bin_edges.end(), x_hi) -
        hist.bin_edges.begin());
    for (int b = std::max(0, b_lo - 1); b < std::min(nb, b_hi + 1); ++b) {
      const double cnt = static_cast<double>(hist.counts[static_cast<std::size_t>(b)]);
      const double w = 1.0 / std::sqrt(std::max(cnt, 1.0));
      double dmass_dmu, dmass_ds;
      if (integrated) {
        const double z_hi = (hist.bin_edges[static_cast<std::size_t>(b) + 1] - mu) / s;
        const double z_lo = (hist.bin_edges[static_cast<std::size_t>(b)] - mu) / s;
        const double dphi = normal_pdf(z_hi) - normal_pdf(z_lo);
        const double dphiz = normal_pdf(z_hi) * z_hi - normal_pdf(z_lo) * z_lo;
        dmass_dmu = -dphi / s;
        dmass_ds = -dphiz / s;
      } else {
        const double width = hist.width(b);
        const double z = (hist.center(b) - mu) / s;
        const double phi = normal_pdf(z);
        dmass_dmu = width * z * phi / (s * s);
        dmass_ds = width * phi * (z * z - 1.0) / (s * s);
      }
      const double scale = n_total * a * w;
      j(b, 0) += scale * dmass_dmu * i;
      j(b, 1) += scale * dmass_dmu;
      j(b, 2) += scale * dmass_ds * ds_dsigma0;
      j(b, 3) += scale * dmass_ds * ds_dsigma1;
    }
  }
  return j;
}

} // namespace detail

/// Alternating NNLS / damped Gauss-Newton refinement of an initialized fit.
inline GaussianMixtureFit fit_mixture(const AuPHistogram& hist,
                                      const GaussianMixtureFit& init,
                                      FitOptions opt = {}) {
  hist.validate();
  init.validate();
  if (hist.n_samples == 0)
    throw validation_error("fit_mixture: empty histogram");

  GaussianMixtureFit fit = init;
  Eigen::Map<Eigen::VectorXd> amp(fit.amplitudes.data(),
                                  static_cast<int>(fit.amplitudes.size()));

  auto residual_norm = [&](const detail::FitEvaluation& ev) {
    return (ev.design * amp - ev.target).norm();
  };

  // amplitude solve at the initial shape
  detail::FitEvaluation ev = detail::evaluate_design(hist, fit);
  {
    const double before = residual_norm(ev);
    const Eigen::VectorXd a = detail::nnls(ev.design, ev.target);
    amp = a;
    const double after = residual_norm(ev);
    if (after > before * (1.0 + 1e-9) + 1e-12)
      throw numeric_error("fit_mixture: amplitude solve increased the residual");
  }
  double res = residual_norm(ev);
  fit.residual_norm = res;

  GaussianMixtureFit best = fit;
  int consecutive_increases = 0;

  for (int outer = 1; outer <= opt.max_outer_iterations; ++outer) {
    fit.n_iterations = outer;

    // (b) shape refinement, backtracking on the step length
    const Eigen::VectorXd r = ev.design * amp - ev.target;
    const Eigen::MatrixXd j = detail::shape_jacobian(hist, fit);
    Eigen::VectorXd step = j.colPivHouseholderQr().solve(-r);
    GaussianMixtureFit trial = fit;
    double trial_res = res;
    bool accepted = false;
    for (int h = 0; h < opt.max_step_halvings; ++h) {
      trial.delta_x = fit.delta_x + step(0);
      trial.x0 = fit.x0 + step(1);
      trial.sigma0 = fit.sigma0 + step(2);
      trial.sigma1 = std::max(0.0, fit.sigma1 + step(3));
      if (trial.delta_x > 0.0 && trial.sigma0 > 0.0) {
        const auto trial_ev = detail::evaluate_design(hist, trial);
        const double rn = (trial_ev.design * amp - trial_ev.target).norm();
        if (rn < res) {
          fit.delta_x = trial.delta_x;
          fit.x0 = trial.x0;
          fit.sigma0 = trial.sigma0;
          fit.sigma1 = trial.sigma1;
          ev = trial_ev;
          trial_res = rn;
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }

    // (a) amplitudes at the (possibly unchanged) shape
    if (accepted) {
      const double before = residual_norm(ev);
      const Eigen::VectorXd a = detail::nnls(ev.design, ev.target);
      amp = a;
      const double after = residual_norm(ev);
      if (after > before * (1.0 + 1e-9) + 1e-12)
        throw numeric_error("fit_mixture: amplitude solve increased the residual");
      trial_res = after;
    }

    const double prev = res;
    res = trial_res;
    fit.residual_norm = res;
    if (res < best.residual_norm) {
      best = fit;
    }
    if (res > prev * (1.0 + 1e-12)) {
      if (++consecutive_increases >= 5) {
        best.converged = false;
        throw fit_failure("fit_mixture: residual increased for 5 consecutive steps", best);
      }
    } else {
      consecutive_increases = 0;
    }

    const double change = std::fabs(prev - res) / std::max(prev, 1e-300);
    if (change < opt.rel_tol) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged && fit.residual_norm > best.residual_norm) fit = best;
  return fit;
}

/// Normalized click statistics from the fitted amplitudes: c_k = A_k / sum A.
inline ClickDistribution clicks_from_fit(const GaussianMixtureFit& fit) {
  fit.validate();
  if (!fit.converged)
    throw validation_error("clicks_from_fit: fit did not converge");
  long double total = 0.0L;
  for (double a : fit.amplitudes) total += a;
  if (!(total > 0.0L))
    throw numeric_error("clicks_from_fit: degenerate fit with all-zero amplitudes");
  ClickDistribution d;
  d.n_pixels = fit.max_order();
  d.probs.resize(fit.amplitudes.size());
  for (std::size_t k = 0; k < fit.amplitudes.size(); ++k)
    d.probs[k] = static_cast<double>(fit.amplitudes[k] / total);
  return d;
}

} // namespace clickstat
