#ifndef SIVSTARK_CLI_HPP
#define SIVSTARK_CLI_HPP

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sivstark/config.hpp"
#include "sivstark/electrostatics.hpp"
#include "sivstark/errors.hpp"
#include "sivstark/fitting.hpp"
#include "sivstark/io.hpp"
#include "sivstark/match_oracle.hpp"
#include "sivstark/matcher.hpp"
#include "sivstark/spectra.hpp"

// Command line driver. Subcommands:
//   field     solve the electrode problem, write the probe-depth line cut and the kappa report
//   simulate  synthetic PLE scans for every configured voltage, plus a manifest
//   fit       Lorentzian fit per spectrum, then the quadratic Stark fit
//   match     frequency matching plan for an ensemble (file or sampled)
//   report    one summary of whatever artifacts the output directory holds
//
// Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure.

namespace sivstark::cli {

namespace fs = std::filesystem;
using io::json;

enum ExitCode { ok = 0, config_error = 1, numerical_error = 2 };

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string in_dir;
  std::string ensemble_path;
  bool oracle = false;
};

struct Context {
  RunConfig config;
  fs::path out;
  std::ostream& out_stream;
  std::ostream& err_stream;
};

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline std::string config_hash(const RunConfig& c) { return io::hex64(io::fnv1a(c.source_text)); }

inline SolverOptions solver_options(const RunConfig& c) {
  SolverOptions opt;
  opt.cells_per_gap = c.cells_per_gap;
  return opt;
}

inline json convergence_json(const ConvergenceReport& r) {
  return {{"iterations", r.iterations}, {"relative_residual", r.relative_residual}, {"multigrid_levels", r.multigrid_levels}};
}

// --- field ------------------------------------------------------------------

inline int cmd_field(Context& ctx) {
  const RunConfig& c = ctx.config;
  const FieldMap map = solve_potential(c.geometry, solver_options(c));
  const KappaCalibration cal = calibrate_kappa(map, c.probe.x_um, c.probe.depth_nm);

  const double gap = c.geometry.gap_um;
  const int samples = std::max(2, static_cast<int>(std::lround(gap / 0.05)) + 1);
  const auto cut = line_cut(map, c.probe.depth_nm, 0.0, gap, samples);
  io::write_atomic(ctx.out / "field_profile.csv", io::line_cut_csv(cut));
  if (c.field_map_stride > 0) io::write_atomic(ctx.out / "field_map.csv", io::field_map_csv(map, c.field_map_stride));

  const json report = {
      {"config_hash", config_hash(c)},
      {"layout", c.geometry.layout == ElectrodeLayout::coplanar_strips ? "coplanar" : "parallel_plates"},
      {"gap_um", gap},
      {"applied_voltage_V", cal.reference_voltage_V},
      {"epsilon", c.geometry.epsilon_diamond},
      {"probe", {{"x_um", c.probe.x_um}, {"depth_nm", c.probe.depth_nm}, {"x_over_gap", c.probe.x_um / gap}}},
      {"grid", {{"nx", map.grid.nx}, {"ny", map.grid.ny}, {"h_um", map.grid.h_um}}},
      {"external_field",
       {{"ex_MVpm", cal.external.ex_MVpm}, {"ey_MVpm", cal.external.ey_MVpm}, {"magnitude_MVpm", cal.external.magnitude()}}},
      {"local_field_MVpm", cal.local_field_MVpm},
      {"kappa_MVpm_per_V", cal.probe.kappa_MVpm_per_V},
      {"convergence", convergence_json(map.report)}};
  io::write_atomic(ctx.out / "field_report.json", dump(report));
  ctx.out_stream << "E_ext " << io::fmt_g(cal.external.magnitude(), 6) << " MV/m, local "
                 << io::fmt_g(cal.local_field_MVpm, 6) << " MV/m, kappa " << io::fmt_g(cal.probe.kappa_MVpm_per_V, 6)
                 << " MV/m per V\n";
  return ok;
}

// --- simulate ---------------------------------------------------------------

inline double resolve_kappa(Context& ctx) {
  const RunConfig& c = ctx.config;
  if (c.probe.kappa_MVpm_per_V) return *c.probe.kappa_MVpm_per_V;
  return calibrate_kappa(c.geometry, c.probe.x_um, c.probe.depth_nm, solver_options(c)).probe.kappa_MVpm_per_V;
}

inline int cmd_simulate(Context& ctx) {
  const RunConfig& c = ctx.config;
  const double kappa = resolve_kappa(ctx);
  const FieldProbe probe{c.probe.x_um, c.probe.depth_nm, kappa};
  const StarkParams& p = c.emitter.params(c.transition);
  const double reference = c.scan.grid.reference_GHz.value_or(p.f_max_GHz);

  const VoltageSeries series = generate_voltage_series(c.emitter, c.transition, probe, c.scan.voltages_V, c.scan.grid,
                                                       c.lineshape, c.amplitude, c.scan.acquisition, c.scan.seed);
  if (!series.failures.empty()) {
    for (const auto& f : series.failures)
      ctx.err_stream << "line outside scan at " << io::fmt_g(f.voltage_V) << " V: " << f.message << "\n";
    return numerical_error;
  }

  json files = json::array();
  for (std::size_t k = 0; k < series.spectra.size(); ++k) {
    const Spectrum& s = series.spectra[k];
    char name[32];
    std::snprintf(name, sizeof name, "spectrum_%03zu.csv", k);
    const std::string text = io::spectrum_csv(s);
    io::write_atomic(ctx.out / "spectra" / name, text);
    const LineModel line = line_model(c.emitter, c.transition, probe, s.voltage_V, c.scan.grid, c.lineshape, c.amplitude);
    files.push_back({{"file", std::string("spectra/") + name},
                     {"voltage_V", s.voltage_V},
                     {"field_MVpm", kappa * s.voltage_V},
                     {"seed", s.noise_seed},
                     {"center_GHz", line.center_GHz},
                     {"fwhm_MHz", line.fwhm_MHz},
                     {"amplitude_cps", line.amplitude_cps},
                     {"hash", io::hex64(io::fnv1a(text))}});
  }
  double span = 0.0;
  if (!files.empty()) {
    double lo = files[0]["center_GHz"], hi = lo;
    for (const auto& f : files) {
      lo = std::min(lo, f["center_GHz"].get<double>());
      hi = std::max(hi, f["center_GHz"].get<double>());
    }
    span = hi - lo;
  }
  const json manifest = {{"config_hash", config_hash(c)},
                         {"root_seed", c.scan.seed},
                         {"emitter", c.emitter.id},
                         {"transition", std::string(to_string(c.transition))},
                         {"kappa_MVpm_per_V", kappa},
                         {"reference_GHz", reference},
                         {"field_rel_uncertainty", c.fit.stark.field_rel_uncertainty},
                         {"center_span_GHz", span},
                         {"spectra", files}};
  const std::string text = dump(manifest);
  io::write_atomic(ctx.out / "manifest.json", text);
  ctx.out_stream << series.spectra.size() << " spectra, manifest " << io::hex64(io::fnv1a(text)) << "\n";
  return ok;
}

// --- fit --------------------------------------------------------------------

inline int cmd_fit(Context& ctx, const fs::path& in_dir) {
  const RunConfig& c = ctx.config;
  const json manifest = json::parse(io::read_file(in_dir / "manifest.json"));
  const double kappa = manifest.at("kappa_MVpm_per_V").get<double>();
  const double reference = manifest.at("reference_GHz").get<double>();

  json records = json::array(), failed = json::array();
  std::vector<StarkPoint> points;
  std::string table = "voltage_V,field_MVpm,shift_GHz,shift_sigma_GHz,fwhm_MHz,fwhm_sigma_MHz,amplitude_cps,amplitude_sigma_cps\n";
  for (const auto& entry : manifest.at("spectra")) {
    const Spectrum s = io::parse_spectrum_csv(io::read_file(in_dir / entry.at("file").get<std::string>()));
    try {
      const auto guesses = detect_peaks(s, c.fit.peaks);
      const LorentzianFit f = fit_lorentzian(s, guesses.front());
      const double e = kappa * s.voltage_V;
      points.push_back({e, 0.0, f.center_GHz, f.center_sigma_GHz});
      json r = io::to_json(f);
      r["voltage_V"] = s.voltage_V;
      r["field_MVpm"] = e;
      records.push_back(r);
      table += io::fmt_g(s.voltage_V) + "," + io::fmt_g(e) + "," + io::fmt_g(f.center_GHz) + "," +
               io::fmt_g(f.center_sigma_GHz) + "," + io::fmt_g(f.fwhm_MHz) + "," + io::fmt_g(f.fwhm_sigma_MHz) + "," +
               io::fmt_g(f.amplitude_cps) + "," + io::fmt_g(f.amplitude_sigma_cps) + "\n";
    } catch (const NumericalError& e) {
      failed.push_back({{"voltage_V", s.voltage_V}, {"reason", e.what()}});
      ctx.err_stream << "no fit at " << io::fmt_g(s.voltage_V) << " V: " << e.what() << "\n";
    }
  }

  const json fits = {{"config_hash", config_hash(c)}, {"fits", records}, {"failed", failed}};
  io::write_atomic(ctx.out / "fits.json", dump(fits));
  io::write_atomic(ctx.out / "stark_table.csv", table);
  if (points.size() < 4) {
    ctx.err_stream << "only " << points.size() << " usable spectra, need at least 4\n";
    return numerical_error;
  }

  const StarkFit sf = fit_stark(points, c.fit.stark);
  const LinearTermResult lin = linear_term_test(points, c.fit.stark);
  json stark = io::to_json(sf);
  stark["reference_GHz"] = reference;
  stark["f_max_absolute_GHz"] = reference + sf.f_max_GHz;
  stark["linear_term"] = {{"coefficient_MHz_per_MVpm", lin.coefficient_MHz_per_MVpm},
                          {"sigma_MHz_per_MVpm", lin.sigma_MHz_per_MVpm},
                          {"significance", lin.significance}};
  io::write_atomic(ctx.out / "stark.json", dump(stark));
  ctx.out_stream << "alpha " << io::fmt_g(sf.alpha_MHz_per_MVpm2, 6) << " +- " << io::fmt_g(sf.alpha_sigma, 3)
                 << " MHz/(MV/m)^2, E0 " << io::fmt_g(sf.e0_MVpm, 6) << " +- " << io::fmt_g(sf.e0_sigma_MVpm, 3)
                 << " MV/m, " << points.size() << " spectra\n";
  return ok;
}

// --- match ------------------------------------------------------------------

inline int cmd_match(Context& ctx, const std::string& ensemble_path, bool with_oracle) {
  const RunConfig& c = ctx.config;
  const TransitionLabel label = c.ensemble.spec.label;
  TuningConstraints tc = c.match.constraints;
  io::Ensemble ens;
  const std::string path = !ensemble_path.empty() ? ensemble_path : c.ensemble.csv.value_or("");
  if (!path.empty()) {
    try {
      ens = io::parse_ensemble_csv(io::read_file(path), label);
    } catch (const std::exception& e) {
      throw ConfigError("ensemble.csv", e.what());
    }
    if (ens.emitters.empty()) throw ConfigError("ensemble.csv", "no emitters in " + path);
    tc.kappa_per_emitter = ens.kappas;
  } else {
    ens.emitters = sample_ensemble(c.ensemble.spec);
    ens.kappas.assign(ens.emitters.size(), tc.kappa_MVpm_per_V);
  }
  if (with_oracle && ens.emitters.size() > 5)
    throw ConfigError("ensemble.n", "--oracle is limited to ensembles of at most 5 emitters");

  const MatchPlan plan = match_frequencies(ens.emitters, label, tc, c.match.objective);
  json j = io::to_json(plan);
  j["config_hash"] = config_hash(c);
  j["transition"] = std::string(to_string(label));
  int code = ok;
  if (with_oracle) {
    const OracleGrid grid;
    const OracleResult o = match_oracle(ens.emitters, label, tc, c.match.objective, grid);
    // one frequency step plus the frequency error of the voltage grid
    const double tol_MHz = grid.f_step_MHz + o.max_slope_MHz_per_V * grid.v_step_V;
    const bool agrees = c.match.objective == MatchObjective::max_matched
                            ? plan.objective_value() >= o.objective
                            : std::abs(plan.objective_value() - o.objective) <= tol_MHz;
    j["oracle"] = {{"objective_value", o.objective}, {"target_GHz", o.target_GHz}, {"tolerance_MHz", tol_MHz},
                   {"agrees", agrees}};
    if (!agrees) {
      ctx.err_stream << "plan disagrees with the grid oracle\n";
      code = numerical_error;
    }
  }
  io::write_atomic(ctx.out / "ensemble.csv", io::ensemble_csv(ens, label));
  io::write_atomic(ctx.out / "match_plan.json", dump(j));
  ctx.out_stream << "matched " << plan.matched_count << "/" << plan.assignments.size() << " (fraction "
                 << io::fmt_g(j["matched_fraction"].get<double>(), 4) << ") at target "
                 << io::fmt_g(plan.target_GHz, 9) << " GHz\n";
  return code;
}

// --- report -----------------------------------------------------------------

inline int cmd_report(Context& ctx, const fs::path& in_dir) {
  json r = {{"config_hash", config_hash(ctx.config)}};
  auto load = [&](const char* name) -> std::optional<json> {
    const fs::path p = in_dir / name;
    if (!fs::exists(p)) return std::nullopt;
    return json::parse(io::read_file(p));
  };
  if (auto f = load("field_report.json"))
    r["field"] = {{"external_MVpm", (*f)["external_field"]["magnitude_MVpm"]},
                  {"local_MVpm", (*f)["local_field_MVpm"]},
                  {"kappa_MVpm_per_V", (*f)["kappa_MVpm_per_V"]}};
  if (auto m = load("manifest.json"))
    r["simulate"] = {{"spectra", (*m)["spectra"].size()},
                     {"center_span_GHz", (*m)["center_span_GHz"]},
                     {"kappa_MVpm_per_V", (*m)["kappa_MVpm_per_V"]}};
  if (auto f = load("fits.json")) r["fit"] = {{"fitted", (*f)["fits"].size()}, {"failed", (*f)["failed"]}};
  if (auto s = load("stark.json"))
    r["stark"] = {{"f_max_GHz", (*s)["f_max_GHz"]},
                  {"f_max_sigma_GHz", (*s)["f_max_sigma_GHz"]},
                  {"alpha_MHz_per_MVpm2", (*s)["alpha_MHz_per_MVpm2"]},
                  {"alpha_sigma_MHz_per_MVpm2", (*s)["alpha_sigma_MHz_per_MVpm2"]},
                  {"e0_MVpm", (*s)["e0_MVpm"]},
                  {"e0_sigma_MVpm", (*s)["e0_sigma_MVpm"]},
                  {"linear_significance", (*s)["linear_term"]["significance"]}};
  if (auto m = load("match_plan.json"))
    r["match"] = {{"objective", (*m)["objective"]},
                  {"target_GHz", (*m)["target_GHz"]},
                  {"matched_fraction", (*m)["matched_fraction"]},
                  {"max_matched_residual_MHz", (*m)["max_matched_residual_MHz"]}};
  if (r.size() == 1) throw ConfigError("output.dir", "no artifacts found in " + in_dir.string());
  io::write_atomic(ctx.out / "report.json", dump(r));
  ctx.out_stream << r.dump(2) << "\n";
  return ok;
}

// --- entry ------------------------------------------------------------------

/// args excludes the program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"SiV Stark tuning toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  std::uint64_t seed = 0;
  app.add_option("-c,--config", o.config_path, "INI run configuration")->required();
  auto* seed_opt = app.add_option("--seed", seed, "overrides scan.seed and ensemble.seed");
  app.add_option("-o,--out", o.out_dir, "output directory (default: output.dir)");

  auto* field = app.add_subcommand("field", "electrostatics and kappa calibration");
  auto* simulate = app.add_subcommand("simulate", "synthetic PLE scans");
  auto* fit = app.add_subcommand("fit", "Lorentzian and Stark fits");
  fit->add_option("--in", o.in_dir, "directory holding manifest.json (default: output directory)");
  auto* match = app.add_subcommand("match", "frequency matching");
  match->add_option("--ensemble", o.ensemble_path, "ensemble CSV (id,f_max_GHz,alpha,e0,kappa)");
  match->add_flag("--oracle", o.oracle, "compare with the exhaustive grid oracle (n <= 5)");
  auto* report = app.add_subcommand("report", "summary of existing artifacts");
  report->add_option("--in", o.in_dir, "directory with artifacts (default: output directory)");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return config_error;
  }

  try {
    std::string text;
    try {
      text = io::read_file(o.config_path);
    } catch (const std::exception& e) {
      throw ConfigError("--config", e.what());
    }
    RunConfig cfg = parse_config(text);
    if (*seed_opt) {
      cfg.scan.seed = seed;
      cfg.ensemble.spec.seed = seed;
      cfg.source_text += "\n# seed override " + std::to_string(seed) + "\n";
    }
    const fs::path out_dir = o.out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(o.out_dir);
    const fs::path in_dir = o.in_dir.empty() ? out_dir : fs::path(o.in_dir);
    Context ctx{std::move(cfg), out_dir, out, err};
    fs::create_directories(out_dir);
    if (field->parsed()) return cmd_field(ctx);
    if (simulate->parsed()) return cmd_simulate(ctx);
    if (fit->parsed()) return cmd_fit(ctx, in_dir);
    if (match->parsed()) return cmd_match(ctx, o.ensemble_path, o.oracle);
    if (report->parsed()) return cmd_report(ctx, in_dir);
    return config_error;
  } catch (const ConfigError& e) {
    err << "config error [" << e.key_path << "]: " << e.what() << "\n";
    return config_error;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return numerical_error;
  } catch (const json::exception& e) {
    err << "malformed artifact: " << e.what() << "\n";
    return config_error;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << "\n";
    return config_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return config_error;
  }
}

inline int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  return run_cli(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace sivstark::cli

#endif  // SIVSTARK_CLI_HPP
