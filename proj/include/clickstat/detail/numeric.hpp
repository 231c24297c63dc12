// Small numeric helpers shared across modules.
#pragma once

#include <cfloat>
#include <cmath>
#include <cstddef>
#include <vector>

namespace clickstat::detail {

/// Compensated (Kahan) accumulator in extended precision, tracking the
/// running sum of absolute terms so callers can bound the rounding error.
struct CompensatedSum {
  long double sum = 0.0L;
  long double comp = 0.0L;
  long double abs_sum = 0.0L;

  void add(long double x) {
    abs_sum += std::fabs(x);
    const long double y = x - comp;
    const long double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }

  /// Upper bound on the accumulated rounding error (crude but safe).
  long double error_bound() const { return 8.0L * LDBL_EPSILON * abs_sum; }
};

/// log of the binomial coefficient, valid for n up to ~1e5 and beyond.
inline long double lchoose(long long n, long long k) {
  if (k < 0 || k > n) return -INFINITY;
  if (k == 0 || k == n) return 0.0L;
  return std::lgamma(static_cast<long double>(n) + 1.0L) -
         std::lgamma(static_cast<long double>(k) + 1.0L) -
         std::lgamma(static_cast<long double>(n - k) + 1.0L);
}

/// Dense Pascal triangle up to row n, in extended precision.
class PascalTable {
public:
  explicit PascalTable(int n) : n_(n), c_((std::size_t(n) + 1) * (std::size_t(n) + 1), 0.0L) {
    for (int i = 0; i <= n; ++i) {
      at(i, 0) = 1.0L;
      for (int j = 1; j <= i; ++j)
        at(i, j) = at(i - 1, j - 1) + (j <= i - 1 ? at(i - 1, j) : 0.0L);
    }
  }
  long double operator()(int n, int k) const {
    if (k < 0 || k > n) return 0.0L;
    return c_[std::size_t(n) * (std::size_t(n_) + 1) + std::size_t(k)];
  }

private:
  long double& at(int n, int k) { return c_[std::size_t(n) * (std::size_t(n_) + 1) + std::size_t(k)]; }
  int n_;
  std::vector<long double> c_;
};

/// Binomial pmf vector P(d | n, p) for d = 0..n, computed by the stable
/// ratio recurrence around the mode.
inline std::vector<double> binomial_pmf(long long n, double p) {
  std::vector<double> out(static_cast<std::size_t>(n) + 1, 0.0);
  if (p <= 0.0) { out[0] = 1.0; return out; }
  if (p >= 1.0) { out.back() = 1.0; return out; }
  const long double lp = std::log(static_cast<long double>(p));
  const long double lq = std::log1p(-static_cast<long double>(p));
  for (long long d = 0; d <= n; ++d) {
    const long double lg = lchoose(n, d) + static_cast<long double>(d) * lp +
                           static_cast<long double>(n - d) * lq;
    out[static_cast<std::size_t>(d)] = static_cast<double>(std::exp(lg));
  }
  return out;
}

/// Distribution of the number of occupied bins after throwing `n_events`
/// balls uniformly into `n_bins` bins. Row e of the result is the
/// distribution after e events; all terms are nonnegative, so the recursion
/// is numerically stable for any event count.
inline std::vector<std::vector<double>> occupancy_table(int n_events, int n_bins) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(n_events) + 1);
  std::vector<double> cur(static_cast<std::size_t>(n_bins) + 1, 0.0);
  cur[0] = 1.0;
  rows[0] = cur;
  const double inv_n = 1.0 / static_cast<double>(n_bins);
  for (int e = 1; e <= n_events; ++e) {
    std::vector<double> nxt(cur.size(), 0.0);
    for (int m = 0; m <= n_bins; ++m) {
      const double stay = cur[static_cast<std::size_t>(m)] * (m * inv_n);
      const double grow = (m > 0) ? cur[static_cast<std::size_t>(m) - 1] *
                                        ((n_bins - m + 1) * inv_n)
                                  : 0.0;
      nxt[static_cast<std::size_t>(m)] = stay + grow;
    }
    cur.swap(nxt);
    rows[static_cast<std::size_t>(e)] = cur;
  }
  return rows;
}

/// Standard normal cdf.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Standard normal density.
inline double normal_pdf(double z) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

} // namespace clickstat::detail
