#ifndef SIVSTARK_IO_HPP
#define SIVSTARK_IO_HPP

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sivstark/electrostatics.hpp"
#include "sivstark/fitting.hpp"
#include "sivstark/matcher.hpp"
#include "sivstark/spectra.hpp"

// File formats:
//   spectrum CSV   "# voltage_V=<v> seed=<s> t_int_s=<t>", then detuning_GHz,counts rows
//   field map CSV  x_um,y_um,phi_V,Ex_MVpm,Ey_MVpm on cell centers
//   ensemble CSV   id,f_max_GHz,alpha,e0,kappa
//   fit results, Stark fits and match plans as JSON objects

namespace sivstark::io {

using json = nlohmann::json;

inline std::string fmt_g(double v, int digits = 9) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

/// 64-bit FNV-1a, used for provenance hashes of configs and manifests.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes to a sibling temporary file, then renames it over the target.
inline void write_atomic(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  const std::filesystem::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, p);
}

// --- spectra ---------------------------------------------------------------

inline std::string spectrum_csv(const Spectrum& s) {
  std::string out = "# voltage_V=" + fmt_g(s.voltage_V) + " seed=" + std::to_string(s.noise_seed) +
                    " t_int_s=" + fmt_g(s.integration_time_s) + "\n";
  out += "detuning_GHz,counts\n";
  for (std::size_t k = 0; k < s.counts.size(); ++k)
    out += fmt_g(s.detunings_GHz[k]) + "," + fmt_g(s.counts[k]) + "\n";
  return out;
}

inline Spectrum parse_spectrum_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Spectrum s;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string tok;
      while (hs >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "voltage_V") s.voltage_V = std::stod(val);
        else if (key == "seed") s.noise_seed = std::stoull(val);
        else if (key == "t_int_s") s.integration_time_s = std::stod(val);
      }
      header = true;
      continue;
    }
    if (line.rfind("detuning_GHz", 0) == 0) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("spectrum CSV: malformed row '" + line + "'");
    s.detunings_GHz.push_back(std::stod(line.substr(0, comma)));
    s.counts.push_back(std::stod(line.substr(comma + 1)));
  }
  if (!header) throw std::runtime_error("spectrum CSV: missing '# voltage_V=' header");
  validate(s);
  return s;
}

// --- field map -------------------------------------------------------------

/// Cell-centered export; stride thins the grid in both directions.
inline std::string field_map_csv(const FieldMap& m, int stride = 1) {
  if (stride < 1) stride = 1;
  std::string out = "x_um,y_um,phi_V,Ex_MVpm,Ey_MVpm\n";
  const GridSpec& g = m.grid;
  for (int j = 0; j < g.cells_y(); j += stride)
    for (int i = 0; i < g.cells_x(); i += stride) {
      const double phi = 0.25 * (m.phi(i, j) + m.phi(i + 1, j) + m.phi(i, j + 1) + m.phi(i + 1, j + 1));
      out += fmt_g(g.x(i) + 0.5 * g.h_um) + "," + fmt_g(g.y(j) + 0.5 * g.h_um) + "," + fmt_g(phi) + "," +
             fmt_g(m.cell_ex(i, j)) + "," + fmt_g(m.cell_ey(i, j)) + "\n";
    }
  return out;
}

inline std::string line_cut_csv(const std::vector<LineCutSample>& cut) {
  std::string out = "x_um,Ex_MVpm,Ey_MVpm,E_abs_MVpm\n";
  for (const auto& s : cut)
    out += fmt_g(s.x_um) + "," + fmt_g(s.field.ex_MVpm) + "," + fmt_g(s.field.ey_MVpm) + "," +
           fmt_g(s.field.magnitude()) + "\n";
  return out;
}

// --- fits ------------------------------------------------------------------

inline json to_json(const LorentzianFit& f) {
  return {{"center_GHz", f.center_GHz},
          {"center_sigma_GHz", f.center_sigma_GHz},
          {"fwhm_MHz", f.fwhm_MHz},
          {"fwhm_sigma_MHz", f.fwhm_sigma_MHz},
          {"amplitude_cps", f.amplitude_cps},
          {"amplitude_sigma_cps", f.amplitude_sigma_cps},
          {"baseline_cps", f.baseline_cps},
          {"baseline_sigma_cps", f.baseline_sigma_cps},
          {"reduced_chi2", f.reduced_chi2},
          {"converged", f.converged},
          {"iterations", f.iterations}};
}

inline LorentzianFit lorentzian_fit_from_json(const json& j) {
  LorentzianFit f;
  f.center_GHz = j.at("center_GHz").get<double>();
  f.center_sigma_GHz = j.at("center_sigma_GHz").get<double>();
  f.fwhm_MHz = j.at("fwhm_MHz").get<double>();
  f.fwhm_sigma_MHz = j.at("fwhm_sigma_MHz").get<double>();
  f.amplitude_cps = j.at("amplitude_cps").get<double>();
  f.amplitude_sigma_cps = j.at("amplitude_sigma_cps").get<double>();
  f.baseline_cps = j.at("baseline_cps").get<double>();
  f.baseline_sigma_cps = j.at("baseline_sigma_cps").get<double>();
  f.reduced_chi2 = j.at("reduced_chi2").get<double>();
  f.converged = j.at("converged").get<bool>();
  f.iterations = j.value("iterations", 0);
  return f;
}

inline json to_json(const StarkFit& s) {
  return {{"f_max_GHz", s.f_max_GHz},
          {"f_max_sigma_GHz", s.f_max_sigma_GHz},
          {"alpha_MHz_per_MVpm2", s.alpha_MHz_per_MVpm2},
          {"alpha_sigma_MHz_per_MVpm2", s.alpha_sigma},
          {"alpha_sigma_systematic_MHz_per_MVpm2", s.alpha_sigma_systematic},
          {"e0_MVpm", s.e0_MVpm},
          {"e0_sigma_MVpm", s.e0_sigma_MVpm},
          {"e0_sigma_systematic_MVpm", s.e0_sigma_systematic_MVpm},
          {"covariance", s.covariance},
          {"polynomial_GHz", s.polynomial},
          {"reduced_chi2", s.reduced_chi2},
          {"n_points", s.n_points}};
}

inline StarkFit stark_fit_from_json(const json& j) {
  StarkFit s;
  s.f_max_GHz = j.at("f_max_GHz").get<double>();
  s.f_max_sigma_GHz = j.at("f_max_sigma_GHz").get<double>();
  s.alpha_MHz_per_MVpm2 = j.at("alpha_MHz_per_MVpm2").get<double>();
  s.alpha_sigma = j.at("alpha_sigma_MHz_per_MVpm2").get<double>();
  s.alpha_sigma_systematic = j.at("alpha_sigma_systematic_MHz_per_MVpm2").get<double>();
  s.e0_MVpm = j.at("e0_MVpm").get<double>();
  s.e0_sigma_MVpm = j.at("e0_sigma_MVpm").get<double>();
  s.e0_sigma_systematic_MVpm = j.at("e0_sigma_systematic_MVpm").get<double>();
  s.covariance = j.at("covariance").get<std::array<double, 9>>();
  s.polynomial = j.at("polynomial_GHz").get<std::array<double, 3>>();
  s.reduced_chi2 = j.at("reduced_chi2").get<double>();
  s.n_points = j.at("n_points").get<int>();
  return s;
}

// --- matching --------------------------------------------------------------

inline std::string to_string(MatchObjective o) {
  return o == MatchObjective::max_matched ? "max-matched" : "min-max-residual";
}

inline MatchObjective parse_objective(const std::string& s) {
  if (s == "max-matched") return MatchObjective::max_matched;
  if (s == "min-max-residual") return MatchObjective::min_max_residual;
  throw std::invalid_argument("unknown objective '" + s + "'");
}

inline json to_json(const MatchPlan& p) {
  json a = json::array();
  for (const auto& x : p.assignments)
    a.push_back({{"id", x.id},
                 {"voltage_V", x.voltage_V},
                 {"achieved_GHz", x.achieved_GHz},
                 {"residual_MHz", x.residual_MHz},
                 {"matched", x.matched}});
  const double n = static_cast<double>(p.assignments.size());
  return {{"objective", to_string(p.objective)},
          {"objective_value", p.objective_value()},
          {"target_GHz", p.target_GHz},
          {"matched_count", p.matched_count},
          {"matched_fraction", n > 0 ? p.matched_count / n : 0.0},
          {"max_residual_MHz", p.max_residual_MHz},
          {"max_matched_residual_MHz", p.max_matched_residual_MHz},
          {"sum_abs_voltage_V", p.sum_abs_voltage_V},
          {"assignments", a}};
}

struct Ensemble {
  std::vector<Emitter> emitters;
  std::vector<double> kappas;  // MV/m per V, one per emitter
};

inline std::string ensemble_csv(const Ensemble& e, TransitionLabel label) {
  std::string out = "id,f_max_GHz,alpha,e0,kappa\n";
  for (std::size_t i = 0; i < e.emitters.size(); ++i) {
    const StarkParams& p = e.emitters[i].params(label);
    out += e.emitters[i].id + "," + fmt_g(p.f_max_GHz, 17) + "," + fmt_g(p.alpha_MHz_per_MVpm2, 17) + "," +
           fmt_g(p.e0_MVpm, 17) + "," + fmt_g(e.kappas.at(i), 17) + "\n";
  }
  return out;
}

inline Ensemble parse_ensemble_csv(const std::string& text, TransitionLabel label) {
  std::istringstream in(text);
  std::string line;
  Ensemble e;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || line.rfind("id,", 0) == 0) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cols.push_back(c);
    if (cols.size() != 5) throw std::runtime_error("ensemble CSV line " + std::to_string(lineno) + ": need 5 columns");
    Emitter em;
    em.id = cols[0];
    StarkParams p{std::stod(cols[1]), std::stod(cols[2]), std::stod(cols[3])};
    validate(p);
    em.stark[label] = p;
    e.emitters.push_back(std::move(em));
    e.kappas.push_back(std::stod(cols[4]));
  }
  return e;
}

}  // namespace sivstark::io

#endif  // SIVSTARK_IO_HPP
