// ============================================================================
// io.hpp -- CSV ingestion/emission, JSON report builders and a small
// structural validator for the versioned report schemas shipped in schemas/.
// ============================================================================
#pragma once

#include <json.hpp>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "clickstat/estimators.hpp"
#include "clickstat/mc_sim.hpp"
#include "clickstat/pulsefit.hpp"
#include "clickstat/types.hpp"

namespace clickstat {

using json = nlohmann::json;

namespace detail {

inline bool parse_double(const std::string& s, double* out) {
  const char* c = s.c_str();
  char* end = nullptr;
  *out = std::strtod(c, &end);
  if (end == c) return false;
  while (*end != '\0') {
    if (!std::isspace(static_cast<unsigned char>(*end))) return false;
    ++end;
  }
  return true;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// shortest lossless decimal form
inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

} // namespace detail

// ----------------------------------------------------------------------------
// CSV
// ----------------------------------------------------------------------------

/// One area value per line; a non-numeric first line is treated as a header.
inline std::vector<double> read_areas_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  std::vector<double> areas;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    double v;
    if (!detail::parse_double(t, &v)) {
      if (line_no == 1) continue; // header
      throw io_error(path + ":" + std::to_string(line_no) + ": unparseable value '" + t + "'");
    }
    areas.push_back(v);
  }
  if (areas.empty()) throw io_error(path + ": no samples");
  return areas;
}

/// One click number per line.
inline ClickSample read_click_sample_csv(const std::string& path, int n_pixels) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  ClickSample s;
  s.counts.assign(static_cast<std::size_t>(n_pixels) + 1, 0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    double v;
    if (!detail::parse_double(t, &v)) {
      if (line_no == 1) continue;
      throw io_error(path + ":" + std::to_string(line_no) + ": unparseable value '" + t + "'");
    }
    const long long k = static_cast<long long>(v);
    if (k < 0 || k > n_pixels || static_cast<double>(k) != v)
      throw io_error(path + ":" + std::to_string(line_no) + ": click number " + t +
                     " outside 0.." + std::to_string(n_pixels));
    ++s.counts[static_cast<std::size_t>(k)];
    ++s.n_trials;
  }
  if (s.n_trials == 0) throw io_error(path + ": no samples");
  return s;
}

/// Two columns "k,c_k"; a header line is detected and skipped.
inline ClickDistribution read_click_distribution_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  std::vector<std::pair<long long, double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const std::size_t comma = t.find(',');
    if (comma == std::string::npos)
      throw io_error(path + ":" + std::to_string(line_no) + ": expected 'k,c_k'");
    double k_val, p_val;
    if (!detail::parse_double(t.substr(0, comma), &k_val) ||
        !detail::parse_double(t.substr(comma + 1), &p_val)) {
      if (line_no == 1) continue;
      throw io_error(path + ":" + std::to_string(line_no) + ": unparseable row '" + t + "'");
    }
    rows.emplace_back(static_cast<long long>(k_val), p_val);
  }
  if (rows.empty()) throw io_error(path + ": no rows");
  ClickDistribution d;
  d.n_pixels = static_cast<int>(rows.size()) - 1;
  d.probs.assign(rows.size(), 0.0);
  for (const auto& [k, p] : rows) {
    if (k < 0 || k >= static_cast<long long>(rows.size()))
      throw io_error(path + ": click index " + std::to_string(k) + " out of range");
    d.probs[static_cast<std::size_t>(k)] = p;
  }
  d.validate(1e-6);
  return d;
}

inline void write_click_distribution_csv(const std::string& path,
                                         const ClickDistribution& d) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << "k,c_k\n";
  for (std::size_t k = 0; k < d.probs.size(); ++k)
    out << k << "," << detail::fmt(d.probs[k]) << "\n";
  if (!out) throw io_error("write failed for '" + path + "'");
}

inline void write_histogram_csv(const std::string& path,
                                const std::vector<std::uint64_t>& hist) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << "k,count\n";
  for (std::size_t k = 0; k < hist.size(); ++k) out << k << "," << hist[k] << "\n";
  if (!out) throw io_error("write failed for '" + path + "'");
}

inline void write_areas_csv(const std::string& path, const std::vector<double>& areas) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << "area\n";
  for (double a : areas) out << detail::fmt(a) << "\n";
  if (!out) throw io_error("write failed for '" + path + "'");
}

// ----------------------------------------------------------------------------
// JSON reports
// ----------------------------------------------------------------------------

inline json to_json(const DetectorConfig& det) {
  return json{{"n_pixels", det.n_pixels},
              {"efficiency", det.efficiency},
              {"dark_rate", det.dark_rate},
              {"crosstalk", det.crosstalk},
              {"preclick_prob", det.preclick_prob}};
}

inline json to_json(const PhotonSource& src) {
  return json{{"kind", to_string(src.kind)}, {"parameter", src.parameter}};
}

inline json to_json(const QReport& r) {
  json j{{"schema", "clickstat/q_report/v1"},
         {"q_binomial", r.q_binomial},
         {"q_mandel", r.q_mandel},
         {"mean", r.mean},
         {"variance", r.variance},
         {"method", to_string(r.method)}};
  if (r.q_binomial_stderr) j["q_binomial_stderr"] = *r.q_binomial_stderr;
  if (r.q_mandel_stderr) j["q_mandel_stderr"] = *r.q_mandel_stderr;
  return j;
}

inline json to_json(const GaussianMixtureFit& fit) {
  json j{{"schema", "clickstat/mixture_fit/v1"},
         {"delta_x", fit.delta_x},
         {"x0", fit.x0},
         {"sigma0", fit.sigma0},
         {"sigma1", fit.sigma1},
         {"amplitudes", fit.amplitudes},
         {"residual_norm", fit.residual_norm},
         {"converged", fit.converged},
         {"n_iterations", fit.n_iterations},
         {"peak_overlap", peak_overlaps(fit)}};
  int negligible = 0;
  long double total = 0.0L;
  for (double a : fit.amplitudes) total += a;
  for (double a : fit.amplitudes)
    if (a < 1e-6 * static_cast<double>(total)) ++negligible;
  j["n_negligible_amplitudes"] = negligible;
  return j;
}

inline json to_json(const SimResult& r, const SimConfig& cfg) {
  return json{{"schema", "clickstat/sim_summary/v1"},
              {"detector", to_json(cfg.det)},
              {"source", to_json(cfg.source)},
              {"seed", cfg.seed},
              {"n_trials", r.n_trials},
              {"click_histogram", r.click_histogram},
              {"light_clicks", r.breakdown.light_clicks},
              {"dark_clicks", r.breakdown.dark_clicks},
              {"crosstalk_clicks", r.breakdown.crosstalk_clicks},
              {"preclicked_pixels", r.breakdown.preclicked_pixels}};
}

inline json to_json(const InversionResult& r) {
  return json{{"schema", "clickstat/inversion/v1"},
              {"photon_probs", r.photon_probs},
              {"total_mass", r.total_mass},
              {"min_prob", r.min_prob},
              {"condition_number", r.condition_number},
              {"residual", r.residual}};
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw io_error("write failed for '" + path + "'");
}

// ----------------------------------------------------------------------------
// Structural schema validation (the subset of JSON Schema the shipped
// schemas use: type, properties, required, items, enum, minimum).
// ----------------------------------------------------------------------------

namespace detail {

inline bool type_matches(const json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "boolean") return v.is_boolean();
  if (t == "integer") return v.is_number_integer() || v.is_number_unsigned();
  if (t == "number") return v.is_number();
  if (t == "null") return v.is_null();
  return false;
}

inline void validate_node(const json& doc, const json& schema,
                          const std::string& where, std::vector<std::string>* errors) {
  if (schema.contains("type")) {
    const auto& t = schema["type"];
    bool ok = false;
    if (t.is_string()) {
      ok = type_matches(doc, t.get<std::string>());
    } else if (t.is_array()) {
      for (const auto& alt : t)
        if (type_matches(doc, alt.get<std::string>())) { ok = true; break; }
    }
    if (!ok) {
      errors->push_back(where + ": expected type " + t.dump());
      return;
    }
  }
  if (schema.contains("enum")) {
    bool ok = false;
    for (const auto& v : schema["enum"])
      if (v == doc) { ok = true; break; }
    if (!ok) errors->push_back(where + ": value not in enum");
  }
  if (schema.contains("const") && schema["const"] != doc)
    errors->push_back(where + ": value differs from const " + schema["const"].dump());
  if (schema.contains("minimum") && doc.is_number() &&
      doc.get<double>() < schema["minimum"].get<double>())
    errors->push_back(where + ": below minimum");
  if (doc.is_object()) {
    if (schema.contains("required"))
      for (const auto& key : schema["required"])
        if (!doc.contains(key.get<std::string>()))
          errors->push_back(where + ": missing required '" + key.get<std::string>() + "'");
    if (schema.contains("properties"))
      for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it)
        if (doc.contains(it.key()))
          validate_node(doc[it.key()], it.value(), where + "/" + it.key(), errors);
  }
  if (doc.is_array() && schema.contains("items")) {
    std::size_t i = 0;
    for (const auto& el : doc)
      validate_node(el, schema["items"], where + "[" + std::to_string(i++) + "]", errors);
  }
}

} // namespace detail

/// Check a document against one of the shipped schemas. Returns a list of
/// violations; empty means valid.
inline std::vector<std::string> schema_validate(const json& doc, const json& schema) {
  std::vector<std::string> errors;
  detail::validate_node(doc, schema, "$", &errors);
  return errors;
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  json j;
  in >> j;
  return j;
}

} // namespace clickstat
