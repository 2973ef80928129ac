#ifndef SIVSTARK_MATCHER_HPP
#define SIVSTARK_MATCHER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "sivstark/core_model.hpp"
#include "sivstark/errors.hpp"
#include "sivstark/golden_section.hpp"
#include "sivstark/units.hpp"

namespace sivstark {

struct EnsembleSpec {
  int n = 9;
  double f0_center_GHz = 0.0;
  double f0_fwhm_GHz = 10.0;
  double alpha_min = 1.4;  // MHz/(MV/m)^2
  double alpha_max = 15.0;
  double e0_min_MVpm = 0.0;
  double e0_max_MVpm = 10.0;
  double alpha_e0_correlation = 0.0;
  std::uint64_t seed = 42;
  TransitionLabel label = TransitionLabel::C;
};

inline void validate(const EnsembleSpec& s) {
  if (s.n < 0) throw std::invalid_argument("EnsembleSpec: negative size");
  if (!(s.f0_fwhm_GHz > 0.0)) throw std::invalid_argument("EnsembleSpec: f0_fwhm must be positive");
  if (!(s.alpha_min > 0.0 && s.alpha_min <= s.alpha_max))
    throw std::invalid_argument("EnsembleSpec: need 0 < alpha_min <= alpha_max");
  if (!(s.e0_min_MVpm <= s.e0_max_MVpm)) throw std::invalid_argument("EnsembleSpec: e0 range not ordered");
  if (!(s.alpha_e0_correlation >= -1.0 && s.alpha_e0_correlation <= 1.0))
    throw std::invalid_argument("EnsembleSpec: correlation outside [-1, 1]");
}

/// f_max normal with the given FWHM; alpha log-uniform and e0 uniform, coupled through a
/// Gaussian copula.
inline std::vector<Emitter> sample_ensemble(const EnsembleSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sigma_f = spec.f0_fwhm_GHz / units::fwhm_per_sigma;
  const double rho = spec.alpha_e0_correlation;
  const double log_lo = std::log(spec.alpha_min), log_hi = std::log(spec.alpha_max);
  auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };

  std::vector<Emitter> out;
  out.reserve(static_cast<std::size_t>(spec.n));
  for (int k = 0; k < spec.n; ++k) {
    const double zf = normal(rng);
    const double z1 = normal(rng);
    const double z3 = normal(rng);
    const double z2 = rho * z1 + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * z3;
    Emitter em;
    em.id = "E" + std::to_string(k + 1);
    StarkParams p;
    p.f_max_GHz = spec.f0_center_GHz + sigma_f * zf;
    p.alpha_MHz_per_MVpm2 = std::clamp(std::exp(log_lo + cdf(z1) * (log_hi - log_lo)), spec.alpha_min, spec.alpha_max);
    p.e0_MVpm = spec.e0_min_MVpm + cdf(z2) * (spec.e0_max_MVpm - spec.e0_min_MVpm);
    em.stark[spec.label] = p;
    out.push_back(std::move(em));
  }
  return out;
}

struct TuningConstraints {
  double v_min_V = 0.0;
  double v_max_V = 100.0;
  double kappa_MVpm_per_V = 0.21;
  std::vector<double> kappa_per_emitter;  // overrides the shared kappa when non-empty
  double match_tolerance_MHz = 90.0;

  double kappa_for(std::size_t i) const {
    return kappa_per_emitter.empty() ? kappa_MVpm_per_V : kappa_per_emitter.at(i);
  }
};

inline void validate(const TuningConstraints& tc) {
  if (!(tc.v_min_V <= tc.v_max_V)) throw std::invalid_argument("TuningConstraints: v_min > v_max");
  if (!(tc.kappa_MVpm_per_V > 0.0)) throw std::invalid_argument("TuningConstraints: kappa must be positive");
  for (double k : tc.kappa_per_emitter)
    if (!(k > 0.0)) throw std::invalid_argument("TuningConstraints: kappa must be positive");
  if (!(tc.match_tolerance_MHz > 0.0)) throw std::invalid_argument("TuningConstraints: tolerance must be positive");
}

struct FrequencyInterval {
  double lo_GHz = 0.0;
  double hi_GHz = 0.0;
  bool contains(double f) const { return f >= lo_GHz && f <= hi_GHz; }
  double distance(double f) const { return f < lo_GHz ? lo_GHz - f : (f > hi_GHz ? f - hi_GHz : 0.0); }
};

/// Image of the transition frequency over the allowed voltage range.
inline FrequencyInterval reachable_interval(const StarkParams& p, double kappa, double v_min, double v_max) {
  const double e_lo = kappa * v_min, e_hi = kappa * v_max;
  const double fa = transition_frequency(p, e_lo), fb = transition_frequency(p, e_hi);
  const bool vertex_inside = p.e0_MVpm >= e_lo && p.e0_MVpm <= e_hi;
  return {std::min(fa, fb), vertex_inside ? p.f_max_GHz : std::max(fa, fb)};
}

inline FrequencyInterval reachable_interval(const Emitter& em, TransitionLabel label, const TuningConstraints& tc,
                                            std::size_t index = 0) {
  return reachable_interval(em.params(label), tc.kappa_for(index), tc.v_min_V, tc.v_max_V);
}

/// Voltage placing the line exactly at the target. Among feasible roots the smallest |v|
/// wins, ties go to the smaller voltage.
inline double voltage_for_target(const StarkParams& p, double kappa, double v_min, double v_max, double target_GHz) {
  const double slack = 1e-9 * std::max({1.0, std::abs(v_min), std::abs(v_max)});
  std::vector<double> fields;
  if (p.alpha_MHz_per_MVpm2 < alpha_epsilon) {
    if (std::abs(target_GHz - p.f_max_GHz) <= 1e-12 * std::max(1.0, std::abs(p.f_max_GHz))) {
      const double v = std::clamp(0.0, v_min, v_max);
      return v;
    }
  } else {
    fields = fields_for_frequency(p, target_GHz);
    // a target a rounding error above the vertex still means the vertex
    if (fields.empty() && target_GHz - p.f_max_GHz <= 1e-12 * std::max(1.0, std::abs(p.f_max_GHz)))
      fields = {p.e0_MVpm};
  }
  double best = std::numeric_limits<double>::quiet_NaN();
  for (double e : fields) {
    double v = e / kappa;
    if (v < v_min - slack || v > v_max + slack) continue;
    v = std::clamp(v, v_min, v_max);
    if (std::isnan(best) || std::abs(v) < std::abs(best) || (std::abs(v) == std::abs(best) && v < best)) best = v;
  }
  if (std::isnan(best)) throw Unreachable("voltage_for_target: target " + std::to_string(target_GHz) +
                                          " GHz is not reachable within the voltage range");
  return best;
}

inline double voltage_for_target(const Emitter& em, TransitionLabel label, double target_GHz,
                                 const TuningConstraints& tc, std::size_t index = 0) {
  return voltage_for_target(em.params(label), tc.kappa_for(index), tc.v_min_V, tc.v_max_V, target_GHz);
}

enum class MatchObjective { max_matched, min_max_residual };

struct MatchAssignment {
  std::string id;
  double voltage_V = 0.0;
  double achieved_GHz = 0.0;
  double residual_MHz = 0.0;
  bool matched = false;
};

struct MatchPlan {
  MatchObjective objective = MatchObjective::max_matched;
  double target_GHz = 0.0;
  std::vector<MatchAssignment> assignments;
  int matched_count = 0;
  double max_residual_MHz = 0.0;          // over all emitters
  double max_matched_residual_MHz = 0.0;  // over matched emitters
  double sum_abs_voltage_V = 0.0;         // over matched emitters

  /// The optimized quantity: matched count, or the largest residual in MHz.
  double objective_value() const {
    return objective == MatchObjective::max_matched ? static_cast<double>(matched_count) : max_residual_MHz;
  }
};

namespace detail {

struct MatchProblem {
  std::vector<StarkParams> params;
  std::vector<double> kappa;
  std::vector<FrequencyInterval> reach;
  double v_min, v_max, tol_GHz;
};

inline MatchAssignment assign_one(const MatchProblem& pb, std::size_t i, double target) {
  const FrequencyInterval& r = pb.reach[i];
  const double aim = std::clamp(target, r.lo_GHz, r.hi_GHz);
  MatchAssignment a;
  a.voltage_V = voltage_for_target(pb.params[i], pb.kappa[i], pb.v_min, pb.v_max, aim);
  a.achieved_GHz = transition_frequency(pb.params[i], pb.kappa[i] * a.voltage_V);
  a.residual_MHz = units::ghz_to_mhz(std::abs(a.achieved_GHz - target));
  a.matched = a.residual_MHz <= units::ghz_to_mhz(pb.tol_GHz);
  return a;
}

inline double matched_voltage_sum(const MatchProblem& pb, double target) {
  double s = 0.0;
  for (std::size_t i = 0; i < pb.params.size(); ++i) {
    if (pb.reach[i].distance(target) > pb.tol_GHz) continue;
    s += std::abs(assign_one(pb, i, target).voltage_V);
  }
  return s;
}

/// Minimizes g on [a, b]: coarse grid first, golden-section refinement around the best node.
template <typename G>
double grid_then_golden(G&& g, double a, double b, int grid = 64) {
  if (!(b > a)) return a;
  const double step = (b - a) / grid;
  int best = 0;
  double best_val = g(a);
  for (int k = 1; k <= grid; ++k) {
    const double v = g(a + k * step);
    if (v < best_val) {
      best_val = v;
      best = k;
    }
  }
  const double lo = a + std::max(0, best - 1) * step, hi = a + std::min(grid, best + 1) * step;
  const double tol = std::max(1e-12, 1e-10 * (std::abs(a) + std::abs(b)));
  const auto [x, fx] = golden_section_minimize(g, lo, hi, tol);
  return fx <= best_val ? x : a + best * step;
}

}  // namespace detail

inline MatchPlan match_frequencies(const std::vector<Emitter>& ensemble, TransitionLabel label,
                                   const TuningConstraints& tc, MatchObjective objective) {
  if (ensemble.empty()) throw std::invalid_argument("match_frequencies: empty ensemble");
  validate(tc);
  if (!tc.kappa_per_emitter.empty() && tc.kappa_per_emitter.size() != ensemble.size())
    throw std::invalid_argument("match_frequencies: kappa_per_emitter size mismatch");

  detail::MatchProblem pb;
  pb.v_min = tc.v_min_V;
  pb.v_max = tc.v_max_V;
  pb.tol_GHz = units::mhz_to_ghz(tc.match_tolerance_MHz);
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    pb.params.push_back(ensemble[i].params(label));
    pb.kappa.push_back(tc.kappa_for(i));
    pb.reach.push_back(reachable_interval(pb.params.back(), pb.kappa.back(), pb.v_min, pb.v_max));
  }
  const std::size_t n = pb.params.size();

  double target = 0.0;
  if (objective == MatchObjective::max_matched) {
    // Coverage of f* by the tolerance-widened intervals is piecewise constant between
    // consecutive endpoints. Each piece is counted at its midpoint; the endpoints
    // themselves only matter when two widened intervals just touch.
    auto coverage = [&](double f) {
      int c = 0;
      for (const auto& r : pb.reach) c += r.distance(f) <= pb.tol_GHz ? 1 : 0;
      return c;
    };
    std::vector<double> events;
    for (const auto& r : pb.reach) {
      events.push_back(r.lo_GHz - pb.tol_GHz);
      events.push_back(r.hi_GHz + pb.tol_GHz);
    }
    std::sort(events.begin(), events.end());
    events.erase(std::unique(events.begin(), events.end()), events.end());
    std::vector<std::pair<double, double>> pieces;
    std::vector<int> counts;
    for (std::size_t k = 0; k < events.size(); ++k) {
      pieces.emplace_back(events[k], events[k]);
      counts.push_back(coverage(events[k]));
      if (k + 1 < events.size()) {
        pieces.emplace_back(events[k], events[k + 1]);
        counts.push_back(coverage(0.5 * (events[k] + events[k + 1])));
      }
    }
    const int best_count = *std::max_element(counts.begin(), counts.end());
    // adjacent pieces with the best count form one segment
    double best_sum = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      if (counts[k] != best_count) continue;
      const double s = pieces[k].first;
      while (k + 1 < pieces.size() && counts[k + 1] == best_count) ++k;
      const double e = pieces[k].second;
      // keep clear of the segment ends, where the match is only marginal
      const double inset = std::min(1e-6, 0.25 * (e - s));
      const double x = detail::grid_then_golden([&](double f) { return detail::matched_voltage_sum(pb, f); },
                                                s + inset, e - inset);
      const double v = detail::matched_voltage_sum(pb, x);
      if (v < best_sum) {
        best_sum = v;
        target = x;
      }
    }
  } else {
    double max_lo = -std::numeric_limits<double>::infinity(), min_hi = -max_lo;
    double min_lo = min_hi, max_hi = max_lo;
    for (const auto& r : pb.reach) {
      max_lo = std::max(max_lo, r.lo_GHz);
      min_hi = std::min(min_hi, r.hi_GHz);
      min_lo = std::min(min_lo, r.lo_GHz);
      max_hi = std::max(max_hi, r.hi_GHz);
    }
    if (max_lo <= min_hi) {
      // every emitter can sit exactly on any f* in the common range
      target = detail::grid_then_golden([&](double f) { return detail::matched_voltage_sum(pb, f); }, max_lo, min_hi);
    } else {
      auto worst = [&](double f) {
        double w = 0.0;
        for (const auto& r : pb.reach) w = std::max(w, r.distance(f));
        return w;
      };
      target = detail::grid_then_golden(worst, min_lo, max_hi);
    }
  }

  MatchPlan plan;
  plan.objective = objective;
  plan.target_GHz = target;
  for (std::size_t i = 0; i < n; ++i) {
    MatchAssignment a = detail::assign_one(pb, i, target);
    a.id = ensemble[i].id;
    plan.max_residual_MHz = std::max(plan.max_residual_MHz, a.residual_MHz);
    if (a.matched) {
      ++plan.matched_count;
      plan.max_matched_residual_MHz = std::max(plan.max_matched_residual_MHz, a.residual_MHz);
      plan.sum_abs_voltage_V += std::abs(a.voltage_V);
    }
    plan.assignments.push_back(std::move(a));
  }
  return plan;
}

}  // namespace sivstark

#endif  // SIVSTARK_MATCHER_HPP
