#ifndef SIVSTARK_MATCH_ORACLE_HPP
#define SIVSTARK_MATCH_ORACLE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sivstark/core_model.hpp"
#include "sivstark/matcher.hpp"
#include "sivstark/units.hpp"

// Exhaustive grid search for the matching problem. It only evaluates the forward Stark
// law on a voltage grid and scans targets on a frequency grid; nothing from the interval
// or root-selection machinery is reused. Intended for small instances.

namespace sivstark {

struct OracleGrid {
  double f_step_MHz = 1.0;
  double v_step_V = 0.01;
};

struct OracleResult {
  double objective = 0.0;  // matched count or min-max residual (MHz)
  double target_GHz = 0.0;
  double f_step_MHz = 0.0;
  double max_slope_MHz_per_V = 0.0;  // bounds the voltage-grid error
};

inline OracleResult match_oracle(const std::vector<Emitter>& ensemble, TransitionLabel label,
                                 const TuningConstraints& tc, MatchObjective objective, const OracleGrid& grid = {}) {
  if (ensemble.empty()) throw std::invalid_argument("match_oracle: empty ensemble");
  const int nv = static_cast<int>(std::floor((tc.v_max_V - tc.v_min_V) / grid.v_step_V + 1e-9)) + 1;
  std::vector<std::vector<double>> freqs(ensemble.size());
  double f_lo = std::numeric_limits<double>::infinity(), f_hi = -f_lo;
  OracleResult res;
  res.f_step_MHz = grid.f_step_MHz;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const StarkParams& p = ensemble[i].params(label);
    const double kappa = tc.kappa_for(i);
    auto& fs = freqs[i];
    fs.reserve(static_cast<std::size_t>(nv) + 1);
    for (int k = 0; k < nv; ++k) fs.push_back(transition_frequency(p, kappa * (tc.v_min_V + k * grid.v_step_V)));
    fs.push_back(transition_frequency(p, kappa * tc.v_max_V));
    std::sort(fs.begin(), fs.end());
    f_lo = std::min(f_lo, fs.front());
    f_hi = std::max(f_hi, fs.back());
    const double e_extreme = std::max(std::abs(kappa * tc.v_min_V - p.e0_MVpm), std::abs(kappa * tc.v_max_V - p.e0_MVpm));
    res.max_slope_MHz_per_V = std::max(res.max_slope_MHz_per_V, 2.0 * p.alpha_MHz_per_MVpm2 * e_extreme * kappa);
  }

  auto nearest = [](const std::vector<double>& fs, double f) {
    const auto it = std::lower_bound(fs.begin(), fs.end(), f);
    double d = std::numeric_limits<double>::infinity();
    if (it != fs.end()) d = *it - f;
    if (it != fs.begin()) d = std::min(d, f - *(it - 1));
    return d;
  };

  const double tol = units::mhz_to_ghz(tc.match_tolerance_MHz);
  const double df = units::mhz_to_ghz(grid.f_step_MHz);
  const double start = f_lo - tol;
  const long steps = static_cast<long>(std::ceil((f_hi + tol - start) / df));
  bool first = true;
  for (long s = 0; s <= steps; ++s) {
    const double f = start + s * df;
    double value = 0.0;
    if (objective == MatchObjective::max_matched) {
      for (const auto& fs : freqs) value += nearest(fs, f) <= tol ? 1.0 : 0.0;
      if (first || value > res.objective) {
        res.objective = value;
        res.target_GHz = f;
      }
    } else {
      for (const auto& fs : freqs) value = std::max(value, units::ghz_to_mhz(nearest(fs, f)));
      if (first || value < res.objective) {
        res.objective = value;
        res.target_GHz = f;
      }
    }
    first = false;
  }
  return res;
}

}  // namespace sivstark

#endif  // SIVSTARK_MATCH_ORACLE_HPP
