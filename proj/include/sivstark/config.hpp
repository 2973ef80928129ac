#ifndef SIVSTARK_CONFIG_HPP
#define SIVSTARK_CONFIG_HPP

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sivstark/core_model.hpp"
#include "sivstark/electrostatics.hpp"
#include "sivstark/errors.hpp"
#include "sivstark/fitting.hpp"
#include "sivstark/matcher.hpp"
#include "sivstark/spectra.hpp"

// Run configuration: an INI file with one section per stage and units in the key names.
//
//   [geometry]  layout, gap_um, electrode_width_um, applied_voltage_V, epsilon,
//               domain_width_um, domain_height_above_um, domain_depth_below_um, cells_per_gap
//   [probe]     x_um, depth_nm, kappa_MVpm_per_V (calibrated from [geometry] when absent)
//   [emitter]   id, transition, f_max_GHz, alpha_MHz_per_MVpm2, e0_MVpm,
//               zpl_center_THz, gs_split_GHz, es_split_GHz
//   [lineshape] gamma0_MHz, gamma_slope_MHz_per_MVpm, transform_limit_MHz
//   [amplitude] a_max_cps, v_on_V, w_on_V, v_peak_V, w_off_V
//   [scan]      voltages_V, detuning_min_GHz, detuning_max_GHz, points, reference_GHz,
//               integration_time_s, dark_rate_cps, shot_noise, seed
//   [fit]       min_field_span_MVpm, field_rel_uncertainty, peak_threshold_k
//   [ensemble]  csv, n, transition, f0_center_GHz, f0_fwhm_GHz, alpha_min, alpha_max,
//               e0_min_MVpm, e0_max_MVpm, correlation, seed
//   [match]     v_min_V, v_max_V, kappa_MVpm_per_V, tolerance_MHz, objective
//   [output]    dir, field_map_stride
//
// Every key is optional; missing keys take the defaults of the corresponding structs.

namespace sivstark {

struct ProbeConfig {
  double x_um = 1.9;
  double depth_nm = 100.0;
  std::optional<double> kappa_MVpm_per_V;
};

struct ScanConfig {
  std::vector<double> voltages_V{0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  ScanGrid grid;
  AcquisitionParams acquisition;
  std::uint64_t seed = 1;
};

struct FitConfig {
  StarkFitOptions stark;
  PeakDetectOptions peaks;
};

struct MatchConfig {
  TuningConstraints constraints;
  MatchObjective objective = MatchObjective::max_matched;
};

struct EnsembleConfig {
  std::optional<std::string> csv;
  EnsembleSpec spec;
};

struct RunConfig {
  ElectrodeGeometry geometry;
  int cells_per_gap = SolverOptions{}.cells_per_gap;
  ProbeConfig probe;
  Emitter emitter;
  TransitionLabel transition = TransitionLabel::C;
  LineShapeParams lineshape;
  AmplitudeModel amplitude;
  ScanConfig scan;
  FitConfig fit;
  EnsembleConfig ensemble;
  MatchConfig match;
  std::string output_dir = "out";
  int field_map_stride = 0;  // 0 disables the full-map export
  std::string source_text;   // verbatim file contents, hashed for provenance
};

namespace detail {

inline Emitter default_emitter() {
  Emitter em;
  em.id = "E4";
  em.stark[TransitionLabel::C] = {0.0, 15.0, 3.0};
  return em;
}

class ConfigReader {
 public:
  explicit ConfigReader(const boost::property_tree::ptree& tree) : tree_(tree) {}

  const boost::property_tree::ptree* section(const std::string& name) {
    known_sections_.insert(name);
    const auto it = tree_.find(name);
    return it == tree_.not_found() ? nullptr : &it->second;
  }

  std::optional<std::string> raw(const std::string& sec, const std::string& key) {
    known_keys_.insert(sec + "." + key);
    const auto* s = section(sec);
    if (!s) return std::nullopt;
    const auto it = s->find(key);
    if (it == s->not_found()) return std::nullopt;
    return it->second.data();
  }

  void number(const std::string& sec, const std::string& key, double& out) {
    if (auto v = raw(sec, key)) out = parse_double(sec + "." + key, *v);
  }
  std::optional<double> optional_number(const std::string& sec, const std::string& key) {
    if (auto v = raw(sec, key)) return parse_double(sec + "." + key, *v);
    return std::nullopt;
  }
  void integer(const std::string& sec, const std::string& key, int& out) {
    if (auto v = raw(sec, key)) {
      const double d = parse_double(sec + "." + key, *v);
      if (d != std::floor(d) || std::abs(d) > 1e9) throw ConfigError(sec + "." + key, "expected an integer");
      out = static_cast<int>(d);
    }
  }
  void seed(const std::string& sec, const std::string& key, std::uint64_t& out) {
    if (auto v = raw(sec, key)) {
      char* end = nullptr;
      errno = 0;
      const unsigned long long u = std::strtoull(v->c_str(), &end, 10);
      if (v->empty() || *end != '\0' || errno != 0 || (*v)[0] == '-')
        throw ConfigError(sec + "." + key, "expected a non-negative integer, got '" + *v + "'");
      out = u;
    }
  }
  void boolean(const std::string& sec, const std::string& key, bool& out) {
    if (auto v = raw(sec, key)) {
      if (*v == "true" || *v == "on" || *v == "yes" || *v == "1") out = true;
      else if (*v == "false" || *v == "off" || *v == "no" || *v == "0") out = false;
      else throw ConfigError(sec + "." + key, "expected a boolean, got '" + *v + "'");
    }
  }
  void text(const std::string& sec, const std::string& key, std::string& out) {
    if (auto v = raw(sec, key)) out = *v;
  }

  /// Rejects sections and keys that were never asked for; catches typos.
  void check_unknown() const {
    for (const auto& [sec, body] : tree_) {
      if (!known_sections_.count(sec)) throw ConfigError(sec, "unknown section");
      for (const auto& [key, val] : body)
        if (!known_keys_.count(sec + "." + key)) throw ConfigError(sec + "." + key, "unknown key");
    }
  }

  static double parse_double(const std::string& path, const std::string& s) {
    char* end = nullptr;
    errno = 0;
    const double d = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(d))
      throw ConfigError(path, "expected a number, got '" + s + "'");
    return d;
  }

 private:
  const boost::property_tree::ptree& tree_;
  std::set<std::string> known_sections_;
  std::set<std::string> known_keys_;
};

/// "0,10,20" or "start:step:stop" (inclusive).
inline std::vector<double> parse_voltage_list(const std::string& path, const std::string& s) {
  std::vector<double> out;
  if (s.find_first_not_of(" \t") == std::string::npos) return out;
  if (s.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(p);
    if (parts.size() != 3) throw ConfigError(path, "range must be start:step:stop");
    const double a = ConfigReader::parse_double(path, parts[0]);
    const double step = ConfigReader::parse_double(path, parts[1]);
    const double b = ConfigReader::parse_double(path, parts[2]);
    if (!(step > 0.0) || b < a) throw ConfigError(path, "range needs step > 0 and stop >= start");
    const long n = static_cast<long>(std::floor((b - a) / step + 1e-9));
    for (long k = 0; k <= n; ++k) out.push_back(a + k * step);
    return out;
  }
  std::stringstream ss(s);
  std::string p;
  while (std::getline(ss, p, ',')) {
    const auto b = p.find_first_not_of(" \t"), e = p.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError(path, "empty entry in list");
    out.push_back(ConfigReader::parse_double(path, p.substr(b, e - b + 1)));
  }
  return out;
}

template <typename F>
void checked(const std::string& path, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()), e.message());
  }
  for (const auto& [sec, body] : tree)
    if (!body.data().empty() && body.empty()) throw ConfigError(sec, "top-level keys must live inside a section");

  detail::ConfigReader r(tree);
  RunConfig c;
  c.source_text = text;

  // geometry
  std::string layout = "coplanar";
  r.text("geometry", "layout", layout);
  if (layout == "parallel_plates") c.geometry.layout = ElectrodeLayout::parallel_plates;
  else if (layout != "coplanar") throw ConfigError("geometry.layout", "expected 'coplanar' or 'parallel_plates'");
  r.number("geometry", "gap_um", c.geometry.gap_um);
  r.number("geometry", "electrode_width_um", c.geometry.electrode_width_um);
  r.number("geometry", "applied_voltage_V", c.geometry.applied_voltage_V);
  r.number("geometry", "epsilon", c.geometry.epsilon_diamond);
  r.number("geometry", "domain_width_um", c.geometry.domain.width_um);
  r.number("geometry", "domain_height_above_um", c.geometry.domain.height_above_um);
  r.number("geometry", "domain_depth_below_um", c.geometry.domain.depth_below_um);
  r.integer("geometry", "cells_per_gap", c.cells_per_gap);
  detail::checked("geometry", [&] { validate(c.geometry); });
  if (c.cells_per_gap < 64) throw ConfigError("geometry.cells_per_gap", "must be at least 64");

  // probe
  r.number("probe", "x_um", c.probe.x_um);
  r.number("probe", "depth_nm", c.probe.depth_nm);
  c.probe.kappa_MVpm_per_V = r.optional_number("probe", "kappa_MVpm_per_V");
  if (c.probe.kappa_MVpm_per_V && !(*c.probe.kappa_MVpm_per_V > 0.0))
    throw ConfigError("probe.kappa_MVpm_per_V", "must be positive");

  // emitter
  c.emitter = detail::default_emitter();
  r.text("emitter", "id", c.emitter.id);
  std::string label = "C";
  r.text("emitter", "transition", label);
  detail::checked("emitter.transition", [&] { c.transition = parse_transition(label); });
  StarkParams p = c.emitter.stark.begin()->second;
  r.number("emitter", "f_max_GHz", p.f_max_GHz);
  r.number("emitter", "alpha_MHz_per_MVpm2", p.alpha_MHz_per_MVpm2);
  r.number("emitter", "e0_MVpm", p.e0_MVpm);
  detail::checked("emitter", [&] { validate(p); });
  c.emitter.stark.clear();
  c.emitter.stark[c.transition] = p;
  r.number("emitter", "zpl_center_THz", c.emitter.levels.zpl_center_THz);
  r.number("emitter", "gs_split_GHz", c.emitter.levels.gs_split_GHz);
  r.number("emitter", "es_split_GHz", c.emitter.levels.es_split_GHz);
  detail::checked("emitter", [&] { validate(c.emitter.levels); });
  c.emitter.position = {c.probe.x_um, c.probe.depth_nm};

  // lineshape / amplitude
  r.number("lineshape", "gamma0_MHz", c.lineshape.gamma0_MHz);
  r.number("lineshape", "gamma_slope_MHz_per_MVpm", c.lineshape.gamma_slope_MHz_per_MVpm);
  r.number("lineshape", "transform_limit_MHz", c.lineshape.transform_limit_MHz);
  detail::checked("lineshape", [&] { validate(c.lineshape); });
  r.number("amplitude", "a_max_cps", c.amplitude.a_max_cps);
  r.number("amplitude", "v_on_V", c.amplitude.v_on_V);
  r.number("amplitude", "w_on_V", c.amplitude.w_on_V);
  r.number("amplitude", "v_peak_V", c.amplitude.v_peak_V);
  if (auto v = r.raw("amplitude", "w_off_V"))
    c.amplitude.w_off_V = (*v == "inf") ? INFINITY : detail::ConfigReader::parse_double("amplitude.w_off_V", *v);
  detail::checked("amplitude", [&] { validate(c.amplitude); });

  // scan
  if (auto v = r.raw("scan", "voltages_V")) c.scan.voltages_V = detail::parse_voltage_list("scan.voltages_V", *v);
  r.number("scan", "detuning_min_GHz", c.scan.grid.detuning_min_GHz);
  r.number("scan", "detuning_max_GHz", c.scan.grid.detuning_max_GHz);
  r.integer("scan", "points", c.scan.grid.points);
  c.scan.grid.reference_GHz = r.optional_number("scan", "reference_GHz");
  r.number("scan", "integration_time_s", c.scan.acquisition.integration_time_s);
  r.number("scan", "dark_rate_cps", c.scan.acquisition.dark_rate_cps);
  r.boolean("scan", "shot_noise", c.scan.acquisition.shot_noise);
  r.seed("scan", "seed", c.scan.seed);
  if (c.scan.grid.points < 16) throw ConfigError("scan.points", "need at least 16 points");
  if (!(c.scan.grid.detuning_max_GHz > c.scan.grid.detuning_min_GHz))
    throw ConfigError("scan.detuning_max_GHz", "must exceed detuning_min_GHz");
  if (!(c.scan.acquisition.integration_time_s > 0.0))
    throw ConfigError("scan.integration_time_s", "must be positive");
  if (!(c.scan.acquisition.dark_rate_cps >= 0.0)) throw ConfigError("scan.dark_rate_cps", "must be >= 0");

  // fit
  r.number("fit", "min_field_span_MVpm", c.fit.stark.min_field_span_MVpm);
  r.number("fit", "field_rel_uncertainty", c.fit.stark.field_rel_uncertainty);
  r.number("fit", "peak_threshold_k", c.fit.peaks.k);
  if (!(c.fit.stark.field_rel_uncertainty >= 0.0 && c.fit.stark.field_rel_uncertainty < 1.0))
    throw ConfigError("fit.field_rel_uncertainty", "must lie in [0, 1)");

  // ensemble
  if (auto v = r.raw("ensemble", "csv")) c.ensemble.csv = *v;
  r.integer("ensemble", "n", c.ensemble.spec.n);
  std::string elabel = std::string(to_string(c.ensemble.spec.label));
  r.text("ensemble", "transition", elabel);
  detail::checked("ensemble.transition", [&] { c.ensemble.spec.label = parse_transition(elabel); });
  r.number("ensemble", "f0_center_GHz", c.ensemble.spec.f0_center_GHz);
  r.number("ensemble", "f0_fwhm_GHz", c.ensemble.spec.f0_fwhm_GHz);
  r.number("ensemble", "alpha_min", c.ensemble.spec.alpha_min);
  r.number("ensemble", "alpha_max", c.ensemble.spec.alpha_max);
  r.number("ensemble", "e0_min_MVpm", c.ensemble.spec.e0_min_MVpm);
  r.number("ensemble", "e0_max_MVpm", c.ensemble.spec.e0_max_MVpm);
  r.number("ensemble", "correlation", c.ensemble.spec.alpha_e0_correlation);
  r.seed("ensemble", "seed", c.ensemble.spec.seed);
  detail::checked("ensemble", [&] { validate(c.ensemble.spec); });

  // match
  r.number("match", "v_min_V", c.match.constraints.v_min_V);
  r.number("match", "v_max_V", c.match.constraints.v_max_V);
  r.number("match", "kappa_MVpm_per_V", c.match.constraints.kappa_MVpm_per_V);
  r.number("match", "tolerance_MHz", c.match.constraints.match_tolerance_MHz);
  if (auto v = r.raw("match", "objective"))
    detail::checked("match.objective", [&] {
      if (*v == "max-matched") c.match.objective = MatchObjective::max_matched;
      else if (*v == "min-max-residual") c.match.objective = MatchObjective::min_max_residual;
      else throw std::invalid_argument("expected 'max-matched' or 'min-max-residual'");
    });
  detail::checked("match", [&] { validate(c.match.constraints); });

  // output
  r.text("output", "dir", c.output_dir);
  r.integer("output", "field_map_stride", c.field_map_stride);
  if (c.field_map_stride < 0) throw ConfigError("output.field_map_stride", "must be >= 0");

  r.check_unknown();
  return c;
}

}  // namespace sivstark

#endif  // SIVSTARK_CONFIG_HPP
