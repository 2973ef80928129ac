#ifndef SIVSTARK_CORE_MODEL_HPP
#define SIVSTARK_CORE_MODEL_HPP

#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sivstark/errors.hpp"
#include "sivstark/units.hpp"

namespace sivstark {

/// Below this polarizability (MHz/(MV/m)^2) the parabola vertex is treated as unidentifiable.
inline constexpr double alpha_epsilon = 1e-6;

/// Quadratic Stark law of one optical transition:
///   f(E) = f_max - alpha * (E - e0)^2
/// with f in GHz, alpha in MHz/(MV/m)^2 and fields in MV/m.
struct StarkParams {
  double f_max_GHz = 0.0;
  double alpha_MHz_per_MVpm2 = 0.0;
  double e0_MVpm = 0.0;
};

inline void validate(const StarkParams& p) {
  if (!std::isfinite(p.f_max_GHz)) throw std::invalid_argument("StarkParams: f_max is not finite");
  if (!std::isfinite(p.alpha_MHz_per_MVpm2) || p.alpha_MHz_per_MVpm2 < 0.0)
    throw std::invalid_argument("StarkParams: alpha must be finite and non-negative");
  if (!std::isfinite(p.e0_MVpm)) throw std::invalid_argument("StarkParams: e0 is not finite");
}

/// Zero-field level structure. zpl_center is the midpoint between the excited and
/// ground-state doublet centers.
struct LevelStructure {
  double zpl_center_THz = 406.7;
  double gs_split_GHz = 50.0;
  double es_split_GHz = 250.0;
};

inline void validate(const LevelStructure& l) {
  if (!(l.gs_split_GHz > 0.0) || !(l.es_split_GHz > 0.0))
    throw std::invalid_argument("LevelStructure: splittings must be positive");
}

/// Optical transitions, A has the highest frequency and D the lowest.
enum class TransitionLabel { A, B, C, D };

inline constexpr std::array<TransitionLabel, 4> all_transitions{TransitionLabel::A, TransitionLabel::B,
                                                                 TransitionLabel::C, TransitionLabel::D};

inline std::string_view to_string(TransitionLabel t) {
  switch (t) {
    case TransitionLabel::A: return "A";
    case TransitionLabel::B: return "B";
    case TransitionLabel::C: return "C";
    case TransitionLabel::D: return "D";
  }
  return "?";
}

inline TransitionLabel parse_transition(std::string_view s) {
  if (s == "A" || s == "a") return TransitionLabel::A;
  if (s == "B" || s == "b") return TransitionLabel::B;
  if (s == "C" || s == "c") return TransitionLabel::C;
  if (s == "D" || s == "d") return TransitionLabel::D;
  throw std::invalid_argument("unknown transition label '" + std::string(s) + "'");
}

/// Lateral distance from the grounded electrode's inner edge and depth below the surface.
struct EmitterPosition {
  double distance_um = 1.9;
  double depth_nm = 100.0;
};

struct Emitter {
  std::string id;
  LevelStructure levels;
  std::map<TransitionLabel, StarkParams> stark;
  EmitterPosition position;

  const StarkParams& params(TransitionLabel t) const {
    auto it = stark.find(t);
    if (it == stark.end())
      throw std::invalid_argument("emitter '" + id + "' has no Stark parameters for transition " +
                                  std::string(to_string(t)));
    return it->second;
  }
};

inline void validate(const Emitter& em, double gap_um) {
  if (em.stark.empty()) throw std::invalid_argument("emitter '" + em.id + "' has no transitions");
  for (const auto& [label, p] : em.stark) validate(p);
  validate(em.levels);
  if (!(em.position.distance_um > 0.0 && em.position.distance_um < gap_um))
    throw std::invalid_argument("emitter '" + em.id + "' lies outside the electrode gap");
  if (!(em.position.depth_nm >= 0.0)) throw std::invalid_argument("emitter '" + em.id + "' has negative depth");
}

// ---------------------------------------------------------------------------

inline double stark_shift(const StarkParams& p, double e_local_MVpm) {
  const double d = e_local_MVpm - p.e0_MVpm;
  return -units::mhz_to_ghz(p.alpha_MHz_per_MVpm2) * d * d;
}

inline double transition_frequency(const StarkParams& p, double e_local_MVpm) {
  return p.f_max_GHz + stark_shift(p, e_local_MVpm);
}

/// All local fields at which the transition sits at f_target, ascending.
/// Empty above the vertex, a single entry exactly at it.
inline std::vector<double> fields_for_frequency(const StarkParams& p, double f_target_GHz) {
  if (p.alpha_MHz_per_MVpm2 < alpha_epsilon)
    throw DegenerateQuadratic("fields_for_frequency: alpha below " + std::to_string(alpha_epsilon) +
                              " MHz/(MV/m)^2, vertex is unidentifiable");
  const double depth = p.f_max_GHz - f_target_GHz;
  if (depth < 0.0) return {};
  if (depth == 0.0) return {p.e0_MVpm};
  const double half = std::sqrt(depth / units::mhz_to_ghz(p.alpha_MHz_per_MVpm2));
  return {p.e0_MVpm - half, p.e0_MVpm + half};
}

/// Absolute line frequencies (GHz) of the four zero-field transitions.
inline std::map<TransitionLabel, double> transition_ladder(const LevelStructure& l) {
  const double center = l.zpl_center_THz * units::ghz_per_thz;
  const double g = 0.5 * l.gs_split_GHz;
  const double e = 0.5 * l.es_split_GHz;
  // upper/lower excited branch to lower/upper ground branch
  return {{TransitionLabel::A, center + e + g},
          {TransitionLabel::B, center + e - g},
          {TransitionLabel::C, center - e + g},
          {TransitionLabel::D, center - e - g}};
}

/// First-order relative uncertainty of alpha given a relative uncertainty of the local field.
/// The shift scales as alpha * E^2, so the field error enters twice.
inline double propagate_field_uncertainty(double rel_sigma_e) {
  if (!(rel_sigma_e >= 0.0 && rel_sigma_e < 1.0))
    throw std::invalid_argument("propagate_field_uncertainty: relative sigma must lie in [0, 1)");
  return 2.0 * rel_sigma_e;
}

}  // namespace sivstark

#endif  // SIVSTARK_CORE_MODEL_HPP
