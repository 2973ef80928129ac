#ifndef SIVSTARK_SPECTRA_HPP
#define SIVSTARK_SPECTRA_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "sivstark/core_model.hpp"
#include "sivstark/electrostatics.hpp"
#include "sivstark/errors.hpp"
#include "sivstark/units.hpp"

namespace sivstark {

struct LineShapeParams {
  double gamma0_MHz = 400.0;
  double gamma_slope_MHz_per_MVpm = 5.0;
  double transform_limit_MHz = 90.0;
};

inline void validate(const LineShapeParams& ls) {
  if (!(ls.transform_limit_MHz > 0.0) || !(ls.gamma0_MHz >= ls.transform_limit_MHz))
    throw std::invalid_argument("LineShapeParams: need gamma0 >= transform_limit > 0");
  if (!(ls.gamma_slope_MHz_per_MVpm >= 0.0)) throw std::invalid_argument("LineShapeParams: negative slope");
}

/// Voltage-dependent brightness: logistic turn-on times a one-sided Gaussian rolloff.
struct AmplitudeModel {
  double a_max_cps = 10000.0;
  double v_on_V = 5.0;
  double w_on_V = 10.0;
  double v_peak_V = 75.0;
  double w_off_V = 60.0;  // may be +inf
};

inline void validate(const AmplitudeModel& am) {
  if (!(am.a_max_cps > 0.0) || !(am.w_on_V > 0.0) || !(am.w_off_V > 0.0))
    throw std::invalid_argument("AmplitudeModel: a_max, w_on and w_off must be positive");
}

/// One PLE scan at fixed voltage. counts are photon counts per bin.
struct Spectrum {
  double voltage_V = 0.0;
  std::vector<double> detunings_GHz;
  std::vector<double> counts;
  double integration_time_s = 0.0;
  std::uint64_t noise_seed = 0;
};

inline void validate(const Spectrum& s) {
  if (s.detunings_GHz.size() != s.counts.size()) throw std::invalid_argument("Spectrum: length mismatch");
  for (std::size_t k = 1; k < s.detunings_GHz.size(); ++k)
    if (!(s.detunings_GHz[k] > s.detunings_GHz[k - 1]))
      throw std::invalid_argument("Spectrum: detunings must be strictly increasing");
  for (double c : s.counts)
    if (!(c >= 0.0)) throw std::invalid_argument("Spectrum: negative counts");
}

/// Uniform detuning grid relative to a reference frequency (defaults to the line's f_max).
struct ScanGrid {
  double detuning_min_GHz = -20.0;
  double detuning_max_GHz = 5.0;
  int points = 200;
  std::optional<double> reference_GHz;

  std::vector<double> detunings() const {
    if (points < 2 || !(detuning_max_GHz > detuning_min_GHz))
      throw std::invalid_argument("ScanGrid: need >= 2 points over a non-empty range");
    std::vector<double> d(points);
    const double step = (detuning_max_GHz - detuning_min_GHz) / (points - 1);
    for (int k = 0; k < points; ++k) d[k] = detuning_min_GHz + k * step;
    return d;
  }
};

struct AcquisitionParams {
  double integration_time_s = 0.1;  // per bin
  double dark_rate_cps = 700.0;
  bool shot_noise = true;  // false gives the expected counts exactly
};

// ---------------------------------------------------------------------------

/// Peak-normalized Lorentzian: equals amplitude at the center, half of it at +-FWHM/2.
inline double lorentzian(double detuning_GHz, double center_GHz, double fwhm_MHz, double amplitude) {
  const double hw = 0.5 * units::mhz_to_ghz(fwhm_MHz);
  const double d = detuning_GHz - center_GHz;
  return amplitude * hw * hw / (d * d + hw * hw);
}

/// FWHM grows linearly with the distance from the parabola vertex.
inline double linewidth_model(const LineShapeParams& ls, double e_local_MVpm, double e0_MVpm) {
  return ls.gamma0_MHz + ls.gamma_slope_MHz_per_MVpm * std::abs(e_local_MVpm - e0_MVpm);
}

inline double amplitude_model(const AmplitudeModel& am, double v) {
  const double z = (v - am.v_on_V) / am.w_on_V;
  const double turn_on = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  const double over = std::max(0.0, v - am.v_peak_V);
  const double rolloff = std::isinf(am.w_off_V) ? 1.0 : std::exp(-over * over / (2.0 * am.w_off_V * am.w_off_V));
  return am.a_max_cps * turn_on * rolloff;
}

/// Expected photon counts per bin, before shot noise.
struct LineModel {
  double center_GHz;  // relative to the scan reference
  double fwhm_MHz;
  double amplitude_cps;
};

inline LineModel line_model(const Emitter& em, TransitionLabel label, const FieldProbe& probe, double v,
                            const ScanGrid& scan, const LineShapeParams& ls, const AmplitudeModel& am) {
  const StarkParams& p = em.params(label);
  const double e_local = probe.kappa_MVpm_per_V * v;
  const double reference = scan.reference_GHz.value_or(p.f_max_GHz);
  return {transition_frequency(p, e_local) - reference, linewidth_model(ls, e_local, p.e0_MVpm),
          amplitude_model(am, v)};
}

inline Spectrum generate_ple_scan(const Emitter& em, TransitionLabel label, const FieldProbe& probe, double v,
                                  const ScanGrid& scan, const LineShapeParams& ls, const AmplitudeModel& am,
                                  const AcquisitionParams& acq, std::uint64_t seed) {
  validate(ls);
  validate(am);
  if (!(probe.kappa_MVpm_per_V > 0.0)) throw std::invalid_argument("generate_ple_scan: probe kappa must be > 0");
  if (!(acq.integration_time_s > 0.0) || !std::isfinite(acq.integration_time_s) || !(acq.dark_rate_cps >= 0.0))
    throw std::invalid_argument("generate_ple_scan: invalid acquisition parameters");

  const LineModel line = line_model(em, label, probe, v, scan, ls, am);
  const double margin = 2.0 * units::mhz_to_ghz(line.fwhm_MHz);
  if (line.center_GHz < scan.detuning_min_GHz - margin || line.center_GHz > scan.detuning_max_GHz + margin)
    throw LineOutsideScan(v, line.center_GHz);

  Spectrum s;
  s.voltage_V = v;
  s.integration_time_s = acq.integration_time_s;
  s.noise_seed = seed;
  s.detunings_GHz = scan.detunings();
  s.counts.resize(s.detunings_GHz.size());

  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < s.counts.size(); ++k) {
    const double rate = lorentzian(s.detunings_GHz[k], line.center_GHz, line.fwhm_MHz, line.amplitude_cps) +
                        acq.dark_rate_cps;
    const double mean = rate * acq.integration_time_s;
    if (!acq.shot_noise) {
      s.counts[k] = mean;
    } else if (mean > 0.0) {
      std::poisson_distribution<long long> poisson(mean);
      s.counts[k] = static_cast<double>(poisson(rng));
    } else {
      s.counts[k] = 0.0;
    }
  }
  return s;
}

/// Seed of the spectrum at position index in a voltage series.
inline std::uint64_t series_seed(std::uint64_t root, std::size_t index) { return root ^ static_cast<std::uint64_t>(index); }

struct SeriesFailure {
  double voltage_V;
  std::string message;
};

struct VoltageSeries {
  std::vector<Spectrum> spectra;
  std::vector<SeriesFailure> failures;
};

inline VoltageSeries generate_voltage_series(const Emitter& em, TransitionLabel label, const FieldProbe& probe,
                                             const std::vector<double>& voltages, const ScanGrid& scan,
                                             const LineShapeParams& ls, const AmplitudeModel& am,
                                             const AcquisitionParams& acq, std::uint64_t root_seed) {
  VoltageSeries out;
  for (std::size_t k = 0; k < voltages.size(); ++k) {
    try {
      out.spectra.push_back(
          generate_ple_scan(em, label, probe, voltages[k], scan, ls, am, acq, series_seed(root_seed, k)));
    } catch (const LineOutsideScan& e) {
      out.failures.push_back({voltages[k], e.what()});
    }
  }
  return out;
}

}  // namespace sivstark

#endif  // SIVSTARK_SPECTRA_HPP
