// ============================================================================
// types.hpp -- core domain types: detector configuration, photon sources,
// click-number distributions and empirical click samples.
// ============================================================================
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace clickstat {

// ----------------------------------------------------------------------------
// Error hierarchy. The CLI maps these onto exit codes (validation -> 2,
// numeric/fit -> 3, I/O -> 4).
// ----------------------------------------------------------------------------
class error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or violated type invariants.
class validation_error : public error {
public:
  using error::error;
};

/// A numerical operation could not produce a meaningful result.
class numeric_error : public error {
public:
  using error::error;
};

/// Q parameter requested for a degenerate distribution (mean 0 or N).
class undefined_q_error : public numeric_error {
public:
  using numeric_error::numeric_error;
};

/// Root-finding target lies outside the supported bracket.
class bracket_error : public numeric_error {
public:
  using numeric_error::numeric_error;
};

/// Inputs are inconsistent with the detector model (e.g. probability mass
/// beyond the pixel count after a noise convolution).
class model_error : public numeric_error {
public:
  using numeric_error::numeric_error;
};

/// File or stream ingestion problem.
class io_error : public error {
public:
  using error::error;
};

// ----------------------------------------------------------------------------
// DetectorConfig
// ----------------------------------------------------------------------------

/// Static description of a pixelated photon detector.
///
/// `dark_rate` is the mean number of dark events per measurement window
/// (the window being one output pulse); it does not rescale with any
/// external notion of exposure time.
struct DetectorConfig {
  int n_pixels = 1;           ///< number of binary click detectors (N >= 1)
  double efficiency = 1.0;    ///< detection efficiency in [0, 1]
  double dark_rate = 0.0;     ///< mean dark events per window, >= 0
  double crosstalk = 0.0;     ///< per-pair trigger probability in [0, 1)
  double preclick_prob = 0.0; ///< probability a pixel is dead before the pulse

  void validate() const {
    if (n_pixels < 1)
      throw validation_error("DetectorConfig: n_pixels must be >= 1, got " +
                             std::to_string(n_pixels));
    if (!(efficiency >= 0.0 && efficiency <= 1.0))
      throw validation_error("DetectorConfig: efficiency must be in [0, 1]");
    if (!(dark_rate >= 0.0))
      throw validation_error("DetectorConfig: dark_rate must be >= 0");
    if (!(crosstalk >= 0.0 && crosstalk < 1.0))
      throw validation_error("DetectorConfig: crosstalk must be in [0, 1)");
    if (!(preclick_prob >= 0.0 && preclick_prob < 1.0))
      throw validation_error("DetectorConfig: preclick_prob must be in [0, 1)");
  }
};

// ----------------------------------------------------------------------------
// PhotonSource
// ----------------------------------------------------------------------------

enum class StateKind { Coherent, Thermal, Fock };

inline const char* to_string(StateKind k) {
  switch (k) {
    case StateKind::Coherent: return "coherent";
    case StateKind::Thermal: return "thermal";
    case StateKind::Fock: return "fock";
  }
  return "?";
}

/// Tagged description of the input light state. `parameter` is |alpha|^2 for
/// coherent states, the mean occupation for thermal states, and the (integer)
/// photon number for Fock states.
struct PhotonSource {
  StateKind kind = StateKind::Coherent;
  double parameter = 0.0;

  static PhotonSource coherent(double mean_photons) {
    return {StateKind::Coherent, mean_photons};
  }
  static PhotonSource thermal(double mean_occupation) {
    return {StateKind::Thermal, mean_occupation};
  }
  static PhotonSource fock(long long n) {
    return {StateKind::Fock, static_cast<double>(n)};
  }

  void validate() const {
    if (!(parameter >= 0.0) || !std::isfinite(parameter))
      throw validation_error("PhotonSource: parameter must be finite and >= 0");
    if (kind == StateKind::Fock &&
        parameter != std::floor(parameter))
      throw validation_error("PhotonSource: Fock parameter must be an integer");
  }

  /// Photon number for Fock states.
  long long fock_n() const { return static_cast<long long>(parameter); }
};

// ----------------------------------------------------------------------------
// ClickDistribution
// ----------------------------------------------------------------------------

/// Probability vector c_0..c_N over the number of clicking pixels.
struct ClickDistribution {
  std::vector<double> probs; ///< size n_pixels + 1
  int n_pixels = 0;

  /// First moment of the click number.
  double mean() const {
    long double m = 0.0L;
    for (std::size_t k = 0; k < probs.size(); ++k)
      m += static_cast<long double>(k) * probs[k];
    return static_cast<double>(m);
  }

  /// Exact variance, accumulated about the mean to avoid cancellation.
  double variance() const {
    const long double m = mean();
    long double v = 0.0L;
    for (std::size_t k = 0; k < probs.size(); ++k) {
      const long double d = static_cast<long double>(k) - m;
      v += d * d * probs[k];
    }
    return static_cast<double>(v);
  }

  void validate(double tol = 1e-10) const {
    if (n_pixels < 1 || probs.size() != static_cast<std::size_t>(n_pixels) + 1)
      throw validation_error("ClickDistribution: probs must have n_pixels + 1 entries");
    long double sum = 0.0L;
    for (double p : probs) {
      if (!(p >= 0.0 && p <= 1.0))
        throw validation_error("ClickDistribution: entries must be in [0, 1]");
      sum += p;
    }
    if (std::fabs(static_cast<double>(sum) - 1.0) > tol)
      throw validation_error("ClickDistribution: probabilities sum to " +
                             std::to_string(static_cast<double>(sum)) +
                             ", expected 1 within " + std::to_string(tol));
  }
};

// ----------------------------------------------------------------------------
// ClickSample
// ----------------------------------------------------------------------------

/// Empirical counterpart of ClickDistribution: a histogram of observed click
/// numbers over 0..N together with the number of recorded pulses.
struct ClickSample {
  std::vector<std::uint64_t> counts; ///< size n_pixels + 1
  std::uint64_t n_trials = 0;

  int n_pixels() const { return static_cast<int>(counts.size()) - 1; }

  double mean() const {
    long double m = 0.0L;
    for (std::size_t k = 0; k < counts.size(); ++k)
      m += static_cast<long double>(k) * counts[k];
    return static_cast<double>(m / static_cast<long double>(n_trials));
  }

  /// Unbiased sample variance. Bias matters here: Q estimates near zero are
  /// sensitive to the n/(n-1) factor at small trial counts.
  double variance() const {
    if (n_trials < 2) return 0.0;
    const long double m = mean();
    long double v = 0.0L;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      const long double d = static_cast<long double>(k) - m;
      v += d * d * static_cast<long double>(counts[k]);
    }
    return static_cast<double>(v / static_cast<long double>(n_trials - 1));
  }

  /// Relative frequencies as a (not necessarily model-normalized) vector.
  std::vector<double> frequencies() const {
    std::vector<double> f(counts.size());
    for (std::size_t k = 0; k < counts.size(); ++k)
      f[k] = static_cast<double>(counts[k]) / static_cast<double>(n_trials);
    return f;
  }

  void validate() const {
    if (counts.size() < 2)
      throw validation_error("ClickSample: counts must cover 0..N with N >= 1");
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    if (total != n_trials || n_trials == 0)
      throw validation_error("ClickSample: counts must sum to n_trials >= 1");
  }

  /// Build a sample from a list of per-pulse click numbers.
  static ClickSample from_clicks(const std::vector<int>& clicks, int n_pixels) {
    if (n_pixels < 1)
      throw validation_error("ClickSample: n_pixels must be >= 1");
    ClickSample s;
    s.counts.assign(static_cast<std::size_t>(n_pixels) + 1, 0);
    for (int k : clicks) {
      if (k < 0 || k > n_pixels)
        throw validation_error("ClickSample: click count " + std::to_string(k) +
                               " outside 0.." + std::to_string(n_pixels));
      ++s.counts[static_cast<std::size_t>(k)];
    }
    s.n_trials = clicks.size();
    s.validate();
    return s;
  }
};

} // namespace clickstat
