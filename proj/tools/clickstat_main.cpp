// clickstat -- command-line front end: analytic click statistics, Monte Carlo
// simulation, pulse-area histogram fitting, crosstalk calibration, Q scans
// and the naive photon-number inversion.
//
// Exit codes: 0 success, 2 validation error, 3 numerical/fit failure,
// 4 I/O error.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "clickstat/clickstat.hpp"

namespace {

using clickstat::json;

struct DetectorFlags {
  int pixels = 0;
  double eta = 1.0;
  double nu = 0.0;
  double chi = 0.0;
  double preclick = 0.0;

  clickstat::DetectorConfig to_config() const {
    clickstat::DetectorConfig det;
    det.n_pixels = pixels;
    det.efficiency = eta;
    det.dark_rate = nu;
    det.crosstalk = chi;
    det.preclick_prob = preclick;
    det.validate();
    return det;
  }
};

void add_detector_flags(CLI::App* sub, DetectorFlags& d) {
  sub->add_option("--pixels", d.pixels, "number of pixels N")->required();
  sub->add_option("--eta", d.eta, "detection efficiency (default 1)");
  sub->add_option("--nu", d.nu, "mean dark counts per window (default 0)");
  sub->add_option("--chi", d.chi, "crosstalk per-pair trigger probability (default 0)");
  sub->add_option("--preclick", d.preclick, "pre-pulse dead-pixel probability (default 0)");
}

struct SourceFlags {
  std::string state = "coherent";
  double mean_photons = -1.0;
  double nbar = -1.0;
  long long n = -1;

  clickstat::PhotonSource to_source() const {
    if (state == "coherent") {
      if (mean_photons < 0.0)
        throw clickstat::validation_error("coherent state needs --mean-photons >= 0");
      return clickstat::PhotonSource::coherent(mean_photons);
    }
    if (state == "thermal") {
      if (nbar < 0.0)
        throw clickstat::validation_error("thermal state needs --nbar >= 0");
      return clickstat::PhotonSource::thermal(nbar);
    }
    if (state == "fock") {
      if (n < 0)
        throw clickstat::validation_error("fock state needs --n >= 0");
      return clickstat::PhotonSource::fock(n);
    }
    throw clickstat::validation_error("unknown --state '" + state + "'");
  }
};

void add_source_flags(CLI::App* sub, SourceFlags& s) {
  sub->add_option("--state", s.state, "input state: coherent | thermal | fock")
      ->check(CLI::IsMember({"coherent", "thermal", "fock"}));
  sub->add_option("--mean-photons", s.mean_photons, "|alpha|^2 for coherent states");
  sub->add_option("--nbar", s.nbar, "mean occupation for thermal states");
  sub->add_option("--n", s.n, "photon number for fock states");
}

void emit_click_table(std::ostream& out, const clickstat::ClickDistribution& d) {
  out << "k,c_k\n";
  for (std::size_t k = 0; k < d.probs.size(); ++k)
    out << k << "," << clickstat::detail::fmt(d.probs[k]) << "\n";
}

json q_fields(const clickstat::ClickDistribution& d) {
  json j;
  j["mean"] = d.mean();
  j["variance"] = d.variance();
  try {
    j["q_binomial"] = clickstat::q_binomial(d);
  } catch (const clickstat::undefined_q_error&) {
    j["q_binomial"] = nullptr;
  }
  try {
    j["q_mandel"] = clickstat::q_mandel(d);
  } catch (const clickstat::undefined_q_error&) {
    j["q_mandel"] = nullptr;
  }
  return j;
}

// ---------------------------------------------------------------------------
// model
// ---------------------------------------------------------------------------

struct ModelArgs {
  DetectorFlags det;
  SourceFlags src;
  std::string csv_path;  // empty -> stdout
  std::string json_path; // empty -> none, "-" -> stdout
};

void run_model(const ModelArgs& a) {
  const auto det = a.det.to_config();
  const auto src = a.src.to_source();
  const auto dist = clickstat::click_distribution_with_crosstalk(src, det);

  if (a.csv_path.empty() || a.csv_path == "-") {
    emit_click_table(std::cout, dist);
  } else {
    clickstat::write_click_distribution_csv(a.csv_path, dist);
  }
  if (!a.json_path.empty()) {
    json j = q_fields(dist);
    j["schema"] = "clickstat/model_report/v1";
    j["detector"] = clickstat::to_json(det);
    j["source"] = clickstat::to_json(src);
    if (a.json_path == "-")
      std::cout << j.dump(2) << "\n";
    else
      clickstat::write_json(a.json_path, j);
  }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  DetectorFlags det;
  SourceFlags src;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string hist_csv;
  std::string summary_json;
  std::string areas_csv;
  double aup_delta_x = 0.0, aup_x0 = 0.0, aup_sigma0 = 0.0, aup_sigma1 = 0.0;
};

void run_simulate(const SimulateArgs& a) {
  clickstat::SimConfig cfg;
  cfg.det = a.det.to_config();
  cfg.source = a.src.to_source();
  cfg.n_trials = a.trials;
  cfg.seed = a.seed;
  if (!a.areas_csv.empty()) {
    clickstat::AupParams aup;
    aup.delta_x = a.aup_delta_x;
    aup.x0 = a.aup_x0;
    aup.sigma0 = a.aup_sigma0;
    aup.sigma1 = a.aup_sigma1;
    aup.validate();
    cfg.aup = aup;
  }
  const auto result = clickstat::simulate(cfg, a.threads);

  if (!a.hist_csv.empty())
    clickstat::write_histogram_csv(a.hist_csv, result.click_histogram);
  if (!a.areas_csv.empty()) clickstat::write_areas_csv(a.areas_csv, result.areas);
  const json summary = clickstat::to_json(result, cfg);
  if (a.summary_json.empty() || a.summary_json == "-")
    std::cout << summary.dump(2) << "\n";
  else
    clickstat::write_json(a.summary_json, summary);
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
  std::string areas_path;
  int pixels = 0;
  int bins = 0;
  double delta_x = 0.0; // 0 -> automatic
  int max_iter = 200;
  int resamples = 2000;
  std::uint64_t seed = 0;
  std::string fit_json;
  std::string clicks_csv;
  std::string q_json;
};

void run_fit(const FitArgs& a) {
  const auto areas = clickstat::read_areas_csv(a.areas_path);
  const auto hist = clickstat::make_histogram(areas, a.bins);
  clickstat::GaussianMixtureFit init =
      a.delta_x > 0.0 ? clickstat::initialize_fit(hist, a.pixels, a.delta_x)
                      : clickstat::initialize_fit(hist, a.pixels);
  clickstat::FitOptions opt;
  opt.max_outer_iterations = a.max_iter;
  const auto fit = clickstat::fit_mixture(hist, init, opt);
  const auto clicks = clickstat::clicks_from_fit(fit);

  if (!a.fit_json.empty()) clickstat::write_json(a.fit_json, clickstat::to_json(fit));
  if (!a.clicks_csv.empty())
    clickstat::write_click_distribution_csv(a.clicks_csv, clicks);

  // Q report with bootstrap errors, treating the recovered statistics as a
  // sample of n_samples pulses
  clickstat::ClickSample sample;
  sample.counts.assign(clicks.probs.size(), 0);
  std::uint64_t total = 0;
  std::size_t largest = 0;
  for (std::size_t k = 0; k < clicks.probs.size(); ++k) {
    sample.counts[k] = static_cast<std::uint64_t>(
        std::llround(clicks.probs[k] * static_cast<double>(hist.n_samples)));
    total += sample.counts[k];
    if (sample.counts[k] > sample.counts[largest]) largest = k;
  }
  const std::uint64_t want = static_cast<std::uint64_t>(hist.n_samples);
  sample.counts[largest] += want - std::min(want, total);
  if (total > want) sample.counts[largest] -= total - want;
  sample.n_trials = want;
  const auto q = clickstat::q_uncertainty(sample, clickstat::UncertaintyMethod::Bootstrap,
                                          a.resamples, a.seed);
  const json qj = clickstat::to_json(q);
  if (a.q_json.empty() || a.q_json == "-")
    std::cout << qj.dump(2) << "\n";
  else
    clickstat::write_json(a.q_json, qj);
}

// ---------------------------------------------------------------------------
// calibrate-crosstalk
// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string clicks_path;
  double q_value = std::numeric_limits<double>::quiet_NaN();
  int pixels = 0;
  int resamples = 2000;
  std::uint64_t seed = 0;
  std::string json_path;
};

void emit_chi_report(const CalibrateArgs& a, json j) {
  j["schema"] = "clickstat/chi_estimate/v1";
  j["n_pixels"] = a.pixels;
  if (a.json_path.empty() || a.json_path == "-")
    std::cout << j.dump(2) << "\n";
  else
    clickstat::write_json(a.json_path, j);
}

void run_calibrate(const CalibrateArgs& a) {
  const bool have_q = !std::isnan(a.q_value);
  if (have_q == !a.clicks_path.empty())
    throw clickstat::validation_error(
        "calibrate-crosstalk: provide exactly one of --clicks or --q");

  if (have_q) {
    if (a.q_value < 0.0) {
      std::cerr << "clickstat: warning: Q < 0 (nonclassical input or statistical "
                   "fluctuation); reporting chi = 0\n";
      emit_chi_report(a, json{{"chi", 0.0},
                              {"q", a.q_value},
                              {"nonclassical_or_noise", true}});
      return;
    }
    const double chi = clickstat::extract_chi(a.q_value, a.pixels);
    emit_chi_report(a, json{{"chi", chi},
                            {"q", a.q_value},
                            {"nonclassical_or_noise", false}});
    return;
  }

  const auto sample = clickstat::read_click_sample_csv(a.clicks_path, a.pixels);
  const double q_hat = clickstat::q_binomial(sample);
  if (q_hat <= 0.0) {
    std::cerr << "clickstat: warning: measured Q_B = " << q_hat
              << " <= 0 (nonclassical input or statistical fluctuation); "
                 "reporting chi = 0\n";
    emit_chi_report(a, json{{"chi", 0.0},
                            {"q", q_hat},
                            {"n_trials", sample.n_trials},
                            {"nonclassical_or_noise", true}});
    return;
  }
  const double chi_hat = clickstat::extract_chi(q_hat, a.pixels);

  // Bootstrap the click histogram, then push every resampled Q through the
  // calibration curve. The curve is tabulated once over the resample range
  // and inverted by monotone interpolation; the interpolation error is far
  // below the statistical spread.
  const auto freq = sample.frequencies();
  std::vector<double> q_draws;
  q_draws.reserve(static_cast<std::size_t>(a.resamples));
  for (int b = 0; b < a.resamples; ++b) {
    clickstat::Philox rng(a.seed, static_cast<std::uint64_t>(b));
    clickstat::ClickSample rs;
    rs.counts = clickstat::detail::multinomial_resample(freq, sample.n_trials, rng);
    rs.n_trials = sample.n_trials;
    const double m = rs.mean();
    if (!(m > 0.0) || !(m < static_cast<double>(a.pixels))) continue;
    q_draws.push_back(clickstat::q_binomial(rs));
  }
  if (q_draws.size() < 2)
    throw clickstat::numeric_error("calibrate-crosstalk: too many degenerate resamples");

  double q_lo = *std::min_element(q_draws.begin(), q_draws.end());
  double q_hi = *std::max_element(q_draws.begin(), q_draws.end());
  const double q_cap = clickstat::crosstalk_q_limit(0.2, a.pixels);
  q_lo = std::max(q_lo, 0.0);
  q_hi = std::min(q_hi, q_cap);
  const double chi_lo = q_lo > 0.0 ? clickstat::extract_chi(q_lo, a.pixels, 1e-8) : 0.0;
  const double chi_hi = q_hi > 0.0 ? clickstat::extract_chi(q_hi, a.pixels, 1e-8) : 0.0;

  const int grid_n = 17;
  std::vector<double> chi_grid(grid_n), q_grid(grid_n);
  for (int i = 0; i < grid_n; ++i) {
    const double t = static_cast<double>(i) / (grid_n - 1);
    chi_grid[static_cast<std::size_t>(i)] = chi_lo + t * (chi_hi - chi_lo);
    q_grid[static_cast<std::size_t>(i)] =
        clickstat::crosstalk_q_limit(chi_grid[static_cast<std::size_t>(i)], a.pixels);
  }
  auto invert_q = [&](double q) {
    if (q <= q_grid.front()) return chi_grid.front();
    if (q >= q_grid.back()) return chi_grid.back();
    const auto it = std::lower_bound(q_grid.begin(), q_grid.end(), q);
    const std::size_t i = static_cast<std::size_t>(it - q_grid.begin());
    const double t = (q - q_grid[i - 1]) / (q_grid[i] - q_grid[i - 1]);
    return chi_grid[i - 1] + t * (chi_grid[i] - chi_grid[i - 1]);
  };

  long double chi_sum = 0.0L, chi_sq = 0.0L, q_sum = 0.0L, q_sq = 0.0L;
  for (double q : q_draws) {
    const double chi = invert_q(std::clamp(q, q_lo, q_hi));
    chi_sum += chi;
    chi_sq += static_cast<long double>(chi) * chi;
    q_sum += q;
    q_sq += static_cast<long double>(q) * q;
  }
  const long double nb = static_cast<long double>(q_draws.size());
  const double chi_stderr = std::sqrt(std::max(
      0.0, static_cast<double>((chi_sq - chi_sum * chi_sum / nb) / (nb - 1.0L))));
  const double q_stderr = std::sqrt(std::max(
      0.0, static_cast<double>((q_sq - q_sum * q_sum / nb) / (nb - 1.0L))));

  emit_chi_report(a, json{{"chi", chi_hat},
                          {"chi_stderr", chi_stderr},
                          {"q", q_hat},
                          {"q_stderr", q_stderr},
                          {"n_trials", sample.n_trials},
                          {"n_resamples", static_cast<int>(q_draws.size())},
                          {"nonclassical_or_noise", false}});
}

// ---------------------------------------------------------------------------
// qscan
// ---------------------------------------------------------------------------

struct QscanArgs {
  DetectorFlags det;
  double mu_over_n_min = 1e-3;
  double mu_over_n_max = 1.5;
  int points = 50;
  bool log_spacing = true;
  std::string csv_path;
};

void run_qscan(const QscanArgs& a) {
  const auto det = a.det.to_config();
  if (!(a.mu_over_n_min > 0.0) || !(a.mu_over_n_max >= a.mu_over_n_min))
    throw clickstat::validation_error("qscan: need 0 < mu-over-n-min <= mu-over-n-max");
  if (a.points < 1) throw clickstat::validation_error("qscan: points must be >= 1");

  std::optional<clickstat::CrosstalkKernel> kernel;
  if (det.crosstalk > 0.0) kernel.emplace(det.crosstalk, det.n_pixels);

  std::ostringstream out;
  out << "mu_over_n,q_binomial,q_mandel,q_mandel_reference\n";
  for (int i = 0; i < a.points; ++i) {
    const double t = a.points == 1 ? 0.0 : static_cast<double>(i) / (a.points - 1);
    const double mu_over_n =
        a.log_spacing
            ? a.mu_over_n_min * std::pow(a.mu_over_n_max / a.mu_over_n_min, t)
            : a.mu_over_n_min + t * (a.mu_over_n_max - a.mu_over_n_min);
    const double mu = mu_over_n * det.n_pixels;
    const auto src = clickstat::PhotonSource::coherent(mu);
    const auto dist = kernel
                          ? clickstat::click_distribution_with_crosstalk(src, det, *kernel)
                          : clickstat::click_distribution(src, det);
    out << clickstat::detail::fmt(mu_over_n) << ","
        << clickstat::detail::fmt(clickstat::q_binomial(dist)) << ","
        << clickstat::detail::fmt(clickstat::q_mandel(dist)) << ","
        << clickstat::detail::fmt(std::expm1(-mu_over_n)) << "\n";
  }
  if (a.csv_path.empty() || a.csv_path == "-") {
    std::cout << out.str();
  } else {
    std::ofstream f(a.csv_path);
    if (!f) throw clickstat::io_error("cannot write '" + a.csv_path + "'");
    f << out.str();
  }
}

// ---------------------------------------------------------------------------
// invert
// ---------------------------------------------------------------------------

struct InvertArgs {
  std::string clicks_path;
  int pixels = 0;
  double eta = 1.0;
  int n_max = -1;
  double max_residual = 1e-6;
  std::string json_path;
};

void run_invert(const InvertArgs& a) {
  const auto dist = clickstat::read_click_distribution_csv(a.clicks_path);
  if (dist.n_pixels != a.pixels)
    throw clickstat::validation_error("invert: table covers N = " +
                                      std::to_string(dist.n_pixels) +
                                      " but --pixels is " + std::to_string(a.pixels));
  clickstat::DetectorConfig det;
  det.n_pixels = a.pixels;
  det.efficiency = a.eta;
  det.validate();
  clickstat::InversionOptions opt;
  opt.n_max = a.n_max;
  opt.max_residual = a.max_residual;
  const auto result = clickstat::naive_photon_inversion(dist, det, opt);
  const json j = clickstat::to_json(result);
  if (a.json_path.empty() || a.json_path == "-")
    std::cout << j.dump(2) << "\n";
  else
    clickstat::write_json(a.json_path, j);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"click-counting statistics of pixelated photon detectors"};
  app.require_subcommand(1);

  ModelArgs model;
  auto* sub_model = app.add_subcommand("model", "analytic click distribution and Q report");
  add_detector_flags(sub_model, model.det);
  add_source_flags(sub_model, model.src);
  sub_model->add_option("--csv", model.csv_path, "click table output ('-' = stdout)");
  sub_model->add_option("--json", model.json_path, "Q report output ('-' = stdout)");
  sub_model->callback([&] { run_model(model); });

  SimulateArgs sim;
  auto* sub_sim = app.add_subcommand("simulate", "Monte Carlo detector simulation");
  add_detector_flags(sub_sim, sim.det);
  add_source_flags(sub_sim, sim.src);
  sub_sim->add_option("--trials", sim.trials, "number of pulses")->required();
  sub_sim->add_option("--seed", sim.seed, "master seed")->envname("CLICKSTAT_SEED");
  sub_sim->add_option("--threads", sim.threads, "worker threads (result-invariant)");
  sub_sim->add_option("--hist-csv", sim.hist_csv, "click histogram output");
  sub_sim->add_option("--summary-json", sim.summary_json, "summary output ('-' = stdout)");
  sub_sim->add_option("--areas-csv", sim.areas_csv, "pulse-area samples output");
  sub_sim->add_option("--aup-delta-x", sim.aup_delta_x, "area peak spacing");
  sub_sim->add_option("--aup-x0", sim.aup_x0, "area zero-click offset");
  sub_sim->add_option("--aup-sigma0", sim.aup_sigma0, "electronic-noise width");
  sub_sim->add_option("--aup-sigma1", sim.aup_sigma1, "per-click width");
  sub_sim->callback([&] { run_simulate(sim); });

  FitArgs fit;
  auto* sub_fit = app.add_subcommand("fit", "decompose a pulse-area CSV into click statistics");
  sub_fit->add_option("--areas", fit.areas_path, "CSV with one area per line")->required();
  sub_fit->add_option("--pixels", fit.pixels, "number of pixels N")->required();
  sub_fit->add_option("--bins", fit.bins, "histogram bins (default: Freedman-Diaconis)");
  sub_fit->add_option("--delta-x", fit.delta_x, "manual peak spacing (skips detection)");
  sub_fit->add_option("--max-iter", fit.max_iter, "outer iteration cap");
  sub_fit->add_option("--resamples", fit.resamples, "bootstrap resamples for the Q report");
  sub_fit->add_option("--seed", fit.seed, "bootstrap seed")->envname("CLICKSTAT_SEED");
  sub_fit->add_option("--fit-json", fit.fit_json, "mixture fit output");
  sub_fit->add_option("--clicks-csv", fit.clicks_csv, "recovered click table output");
  sub_fit->add_option("--q-json", fit.q_json, "Q report output ('-' = stdout)");
  sub_fit->callback([&] { run_fit(fit); });

  CalibrateArgs cal;
  auto* sub_cal = app.add_subcommand("calibrate-crosstalk",
                                     "extract chi from low-intensity clicks or a Q value");
  sub_cal->add_option("--clicks", cal.clicks_path, "CSV with one click number per line");
  sub_cal->add_option("--q", cal.q_value, "measured low-intensity Q value");
  sub_cal->add_option("--pixels", cal.pixels, "number of pixels N")->required();
  sub_cal->add_option("--resamples", cal.resamples, "bootstrap resamples");
  sub_cal->add_option("--seed", cal.seed, "bootstrap seed")->envname("CLICKSTAT_SEED");
  sub_cal->add_option("--json", cal.json_path, "chi estimate output ('-' = stdout)");
  sub_cal->callback([&] { run_calibrate(cal); });

  QscanArgs qscan;
  auto* sub_qscan = app.add_subcommand("qscan", "analytic Q curves over an intensity grid");
  add_detector_flags(sub_qscan, qscan.det);
  sub_qscan->add_option("--mu-over-n-min", qscan.mu_over_n_min, "grid start (mu/N)");
  sub_qscan->add_option("--mu-over-n-max", qscan.mu_over_n_max, "grid end (mu/N)");
  sub_qscan->add_option("--points", qscan.points, "grid size");
  sub_qscan->add_flag("--log,!--linear", qscan.log_spacing, "log-spaced grid (default)");
  sub_qscan->add_option("--csv", qscan.csv_path, "table output ('-' = stdout)");
  sub_qscan->callback([&] { run_qscan(qscan); });

  InvertArgs inv;
  auto* sub_inv = app.add_subcommand("invert", "naive click-to-photon least-squares inversion");
  sub_inv->add_option("--clicks", inv.clicks_path, "click table CSV (k,c_k)")->required();
  sub_inv->add_option("--pixels", inv.pixels, "number of pixels N")->required();
  sub_inv->add_option("--eta", inv.eta, "detection efficiency (default 1)");
  sub_inv->add_option("--n-max", inv.n_max, "truncation order (default 4N)");
  sub_inv->add_option("--max-residual", inv.max_residual,
                      "relative residual treated as ill-posed");
  sub_inv->add_option("--json", inv.json_path, "inversion output ('-' = stdout)");
  sub_inv->callback([&] { run_invert(inv); });

  for (auto* sub : app.get_subcommands({}))
    sub->set_config("--config", "", "key = value file; command-line flags override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const clickstat::validation_error& e) {
    std::cerr << "clickstat: " << e.what() << "\n";
    return 2;
  } catch (const clickstat::io_error& e) {
    std::cerr << "clickstat: " << e.what() << "\n";
    return 4;
  } catch (const clickstat::fit_failure& e) {
    std::cerr << "clickstat: " << e.what() << "\n";
    return 3;
  } catch (const clickstat::initialization_error& e) {
    std::cerr << "clickstat: " << e.what()
              << " (rerun with an explicit --delta-x)\n";
    return 3;
  } catch (const clickstat::numeric_error& e) {
    std::cerr << "clickstat: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "clickstat: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
