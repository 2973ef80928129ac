#ifndef SIVSTARK_FITTING_HPP
#define SIVSTARK_FITTING_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "sivstark/core_model.hpp"
#include "sivstark/errors.hpp"
#include "sivstark/spectra.hpp"
#include "sivstark/units.hpp"

namespace sivstark {

struct PeakGuess {
  double center_GHz = 0.0;
  double fwhm_MHz = 0.0;
  double amplitude_cps = 0.0;  // above the baseline
};

struct LorentzianFit {
  double center_GHz = 0.0;
  double center_sigma_GHz = 0.0;
  double fwhm_MHz = 0.0;
  double fwhm_sigma_MHz = 0.0;
  double amplitude_cps = 0.0;
  double amplitude_sigma_cps = 0.0;
  double baseline_cps = 0.0;
  double baseline_sigma_cps = 0.0;
  double reduced_chi2 = 0.0;
  bool converged = false;
  int iterations = 0;
};

class NotConverged : public NumericalError {
 public:
  NotConverged(const std::string& what, LorentzianFit best_so_far) : NumericalError(what), best(best_so_far) {}
  LorentzianFit best;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  double m = v[n / 2];
  if (n % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + n / 2));
  return m;
}

}  // namespace detail

struct PeakDetectOptions {
  double k = 5.0;  // threshold in robust standard deviations
};

/// Local maxima of the 3-bin smoothed counts that rise above median + k*sigma and have
/// a prominence of at least k times the local noise. Sigma is the scaled MAD, floored
/// at the Poisson level of the median. Ordered by amplitude, largest first.
inline std::vector<PeakGuess> detect_peaks(const Spectrum& s, const PeakDetectOptions& opt = {}) {
  const std::size_t n = s.counts.size();
  if (n < 16) throw std::invalid_argument("detect_peaks: need at least 16 samples");
  const auto& x = s.detunings_GHz;
  const auto& y = s.counts;

  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1, hi = std::min(n - 1, i + 1);
    double acc = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) acc += y[j];
    ys[i] = acc / static_cast<double>(hi - lo + 1);
  }

  const double med = detail::median(y);
  std::vector<double> dev(n);
  for (std::size_t i = 0; i < n; ++i) dev[i] = std::abs(y[i] - med);
  const double sigma = std::max(1.4826 * detail::median(dev), std::sqrt(std::max(med, 0.0) / 3.0));
  const double threshold = med + opt.k * sigma;
  const double step = (x.back() - x.front()) / static_cast<double>(n - 1);

  std::vector<PeakGuess> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = ys[i];
    if (v <= threshold) continue;
    if (i > 0 && !(v > ys[i - 1])) continue;
    if (i + 1 < n && !(v >= ys[i + 1])) continue;

    double left_min = v, right_min = v;
    for (std::size_t j = i; j-- > 0;) {
      if (ys[j] > v) break;
      left_min = std::min(left_min, ys[j]);
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      if (ys[j] > v) break;
      right_min = std::min(right_min, ys[j]);
    }
    const double prominence = v - std::max(left_min, right_min);
    if (prominence <= opt.k * std::sqrt(sigma * sigma + v / 3.0)) continue;

    double center = x[i];
    if (i > 0 && i + 1 < n) {
      const double denom = ys[i - 1] - 2.0 * v + ys[i + 1];
      if (denom < 0.0) center += 0.5 * step * (ys[i - 1] - ys[i + 1]) / denom;
    }

    const double peak = std::max({y[i], i > 0 ? y[i - 1] : 0.0, i + 1 < n ? y[i + 1] : 0.0});
    const double half = med + 0.5 * (v - med);
    double xl = x.front(), xr = x.back();
    for (std::size_t j = i; j-- > 0;)
      if (ys[j] < half) {
        xl = x[j] + (half - ys[j]) / (ys[j + 1] - ys[j]) * (x[j + 1] - x[j]);
        break;
      }
    for (std::size_t j = i + 1; j < n; ++j)
      if (ys[j] < half) {
        xr = x[j - 1] + (ys[j - 1] - half) / (ys[j - 1] - ys[j]) * (x[j] - x[j - 1]);
        break;
      }
    const double fwhm_GHz = std::max(xr - xl, step);
    out.push_back({center, units::ghz_to_mhz(fwhm_GHz), (peak - med) / s.integration_time_s});
  }
  if (out.empty()) throw NoPeakFound("detect_peaks: no line above the noise floor");
  std::stable_sort(out.begin(), out.end(),
                   [](const PeakGuess& a, const PeakGuess& b) { return a.amplitude_cps > b.amplitude_cps; });
  return out;
}

struct LorentzFitOptions {
  double step_tolerance = 1e-10;
  double gradient_tolerance = 1e-10;
  int max_iterations = 200;
};

/// Weighted Levenberg-Marquardt fit of baseline + Lorentzian. Weights are 1/(counts + 1).
/// Uncertainties come from the inverse of J^T W J at the optimum.
inline LorentzianFit fit_lorentzian(const Spectrum& s, const PeakGuess& guess, const LorentzFitOptions& opt = {}) {
  validate(s);
  const std::size_t n = s.counts.size();
  if (n < 5) throw std::invalid_argument("fit_lorentzian: need at least 5 samples");
  if (!(s.integration_time_s > 0.0)) throw std::invalid_argument("fit_lorentzian: integration time must be > 0");
  if (guess.center_GHz < s.detunings_GHz.front() || guess.center_GHz > s.detunings_GHz.back())
    throw std::invalid_argument("fit_lorentzian: guess lies outside the scan window");

  using Vec4 = Eigen::Matrix<double, 4, 1>;
  using Mat4 = Eigen::Matrix<double, 4, 4>;
  const double t = s.integration_time_s;
  const auto& x = s.detunings_GHz;
  const auto& y = s.counts;
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / (y[i] + 1.0);

  // center GHz, fwhm GHz, amplitude counts, baseline counts
  Vec4 p;
  p << guess.center_GHz, units::mhz_to_ghz(std::max(guess.fwhm_MHz, 1e-6)), guess.amplitude_cps * t,
      detail::median(y);

  auto cost_of = [&](const Vec4& q) {
    const double hw2 = 0.25 * q[1] * q[1];
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x[i] - q[0];
      const double r = y[i] - (q[3] + q[2] * hw2 / (d * d + hw2));
      c += w[i] * r * r;
    }
    return c;
  };
  auto normal_equations = [&](const Vec4& q, Mat4& jtj, Vec4& jtr) {
    jtj.setZero();
    jtr.setZero();
    const double hw = 0.5 * q[1], hw2 = hw * hw;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x[i] - q[0];
      const double den = d * d + hw2;
      const double l = hw2 / den;
      Vec4 j;
      j << q[2] * hw2 * 2.0 * d / (den * den), q[2] * hw * d * d / (den * den), l, 1.0;
      const double r = y[i] - (q[3] + q[2] * l);
      jtj.noalias() += w[i] * j * j.transpose();
      jtr += w[i] * r * j;
    }
  };

  auto package = [&](const Vec4& q, double cost, const Mat4* cov, bool converged, int iters) {
    LorentzianFit f;
    f.center_GHz = q[0];
    f.fwhm_MHz = units::ghz_to_mhz(q[1]);
    f.amplitude_cps = q[2] / t;
    f.baseline_cps = q[3] / t;
    if (cov) {
      f.center_sigma_GHz = std::sqrt(std::max(0.0, (*cov)(0, 0)));
      f.fwhm_sigma_MHz = units::ghz_to_mhz(std::sqrt(std::max(0.0, (*cov)(1, 1))));
      f.amplitude_sigma_cps = std::sqrt(std::max(0.0, (*cov)(2, 2))) / t;
      f.baseline_sigma_cps = std::sqrt(std::max(0.0, (*cov)(3, 3))) / t;
    }
    f.reduced_chi2 = cost / static_cast<double>(n - 4);
    f.converged = converged;
    f.iterations = iters;
    return f;
  };

  double cost = cost_of(p);
  double lambda = 1e-3;
  bool converged = false;
  int it = 0;
  Mat4 jtj;
  Vec4 jtr;
  for (; it < opt.max_iterations && !converged; ++it) {
    normal_equations(p, jtj, jtr);
    double grad = 0.0;
    for (int k = 0; k < 4; ++k)
      if (jtj(k, k) > 0.0) grad = std::max(grad, std::abs(jtr[k]) / std::sqrt(jtj(k, k)));
    if (grad < opt.gradient_tolerance) {
      converged = true;
      break;
    }
    bool accepted = false;
    while (!accepted) {
      Mat4 a = jtj;
      for (int k = 0; k < 4; ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-300);
      const Vec4 delta = a.ldlt().solve(jtr);
      const Vec4 trial = p + delta;
      const double trial_cost = trial[1] > 0.0 && delta.allFinite() ? cost_of(trial) : std::numeric_limits<double>::infinity();
      if (trial_cost <= cost) {
        double rel = 0.0;
        for (int k = 0; k < 4; ++k) rel = std::max(rel, std::abs(delta[k]) / (std::abs(p[k]) + 1e-12));
        p = trial;
        cost = trial_cost;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        if (rel < opt.step_tolerance) converged = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) break;
      }
    }
    if (!accepted) {
      // no descent direction left at working precision
      converged = grad < 1e-6 * std::max(1.0, std::sqrt(cost));
      if (!converged)
        throw NotConverged("fit_lorentzian: step rejected at maximal damping", package(p, cost, nullptr, false, it));
      break;
    }
  }
  if (!converged)
    throw NotConverged("fit_lorentzian: iteration cap reached", package(p, cost, nullptr, false, it));

  normal_equations(p, jtj, jtr);
  Eigen::FullPivLU<Mat4> lu(jtj);
  if (!lu.isInvertible() || lu.rcond() < 1e-14) throw IllConditioned("fit_lorentzian: singular normal equations");
  const Mat4 cov = lu.inverse();
  return package(p, cost, &cov, true, it);
}

// ---------------------------------------------------------------------------

/// One (local field, line center) pair of a Stark series.
struct StarkPoint {
  double e_MVpm = 0.0;
  double e_sigma_MVpm = 0.0;
  double f_GHz = 0.0;
  double f_sigma_GHz = 0.0;
};

struct StarkFitOptions {
  double min_field_span_MVpm = 5.0;
  double field_rel_uncertainty = 0.07;  // systematic, reported separately
};

struct StarkFit {
  double f_max_GHz = 0.0;
  double f_max_sigma_GHz = 0.0;
  double alpha_MHz_per_MVpm2 = 0.0;
  double alpha_sigma = 0.0;
  double alpha_sigma_systematic = 0.0;
  double e0_MVpm = 0.0;
  double e0_sigma_MVpm = 0.0;
  double e0_sigma_systematic_MVpm = 0.0;
  std::array<double, 9> covariance{};  // (f_max, alpha, e0), row-major
  std::array<double, 3> polynomial{};  // c0 + c1 E + c2 E^2 in GHz and MV/m
  double reduced_chi2 = 0.0;
  int n_points = 0;

  StarkParams params() const { return {f_max_GHz, alpha_MHz_per_MVpm2, e0_MVpm}; }
};

namespace detail {

struct WeightedLsq {
  Eigen::VectorXd coef;
  Eigen::MatrixXd cov;
  double chi2 = 0.0;
};

/// Weighted linear least squares via QR. Covariance is scaled by the residual variance
/// when the weights are not absolute.
inline WeightedLsq weighted_lsq(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                bool absolute_weights) {
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::MatrixXd a = sw.asDiagonal() * design;
  const Eigen::VectorXd b = sw.cwiseProduct(y);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  WeightedLsq out;
  out.coef = qr.solve(b);
  out.chi2 = (a * out.coef - b).squaredNorm();
  const Eigen::MatrixXd ata = a.transpose() * a;
  out.cov = ata.ldlt().solve(Eigen::MatrixXd::Identity(ata.rows(), ata.cols()));
  const Eigen::Index dof = design.rows() - design.cols();
  if (!absolute_weights && dof > 0) out.cov *= out.chi2 / static_cast<double>(dof);
  return out;
}

struct PreparedSeries {
  Eigen::VectorXd e, f, w;
  double e_ref = 0.0, f_ref = 0.0;
  bool absolute = false;
};

inline PreparedSeries prepare_series(const std::vector<StarkPoint>& pts, const StarkFitOptions& opt) {
  if (pts.size() < 4) throw InsufficientSpread("fit_stark: need at least 4 points");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& q : pts) {
    lo = std::min(lo, q.e_MVpm);
    hi = std::max(hi, q.e_MVpm);
  }
  if (hi - lo < opt.min_field_span_MVpm)
    throw InsufficientSpread("fit_stark: field span " + std::to_string(hi - lo) + " MV/m below the minimum " +
                             std::to_string(opt.min_field_span_MVpm));
  PreparedSeries s;
  const auto n = static_cast<Eigen::Index>(pts.size());
  s.e.resize(n);
  s.f.resize(n);
  s.w.resize(n);
  s.absolute = std::all_of(pts.begin(), pts.end(), [](const StarkPoint& q) { return q.f_sigma_GHz > 0.0; });
  for (Eigen::Index i = 0; i < n; ++i) {
    s.e_ref += pts[i].e_MVpm / static_cast<double>(n);
    s.f_ref += pts[i].f_GHz / static_cast<double>(n);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    s.e[i] = pts[i].e_MVpm - s.e_ref;
    s.f[i] = pts[i].f_GHz - s.f_ref;
    s.w[i] = s.absolute ? 1.0 / (pts[i].f_sigma_GHz * pts[i].f_sigma_GHz) : 1.0;
  }
  return s;
}

inline Eigen::MatrixXd quadratic_design(const Eigen::VectorXd& u) {
  Eigen::MatrixXd x(u.size(), 3);
  x.col(0).setOnes();
  x.col(1) = u;
  x.col(2) = u.cwiseProduct(u);
  return x;
}

/// Quadratic fit in the centered frame; a second pass folds field uncertainties into
/// effective weights through the local slope.
inline WeightedLsq fit_centered_quadratic(PreparedSeries& s, const std::vector<StarkPoint>& pts) {
  const Eigen::MatrixXd x = quadratic_design(s.e);
  WeightedLsq fit = weighted_lsq(x, s.f, s.w, s.absolute);
  const bool field_errors =
      s.absolute && std::any_of(pts.begin(), pts.end(), [](const StarkPoint& q) { return q.e_sigma_MVpm > 0.0; });
  if (field_errors) {
    for (Eigen::Index i = 0; i < s.e.size(); ++i) {
      const double slope = fit.coef[1] + 2.0 * fit.coef[2] * s.e[i];
      const double se = pts[i].e_sigma_MVpm, sf = pts[i].f_sigma_GHz;
      s.w[i] = 1.0 / (sf * sf + slope * slope * se * se);
    }
    fit = weighted_lsq(x, s.f, s.w, s.absolute);
  }
  return fit;
}

}  // namespace detail

/// Polynomial fit f = c0 + c1 E + c2 E^2, mapped to (f_max, alpha, e0) with first-order
/// covariance propagation.
inline StarkFit fit_stark(const std::vector<StarkPoint>& points, const StarkFitOptions& opt = {}) {
  detail::PreparedSeries s = detail::prepare_series(points, opt);
  const detail::WeightedLsq q = detail::fit_centered_quadratic(s, points);
  const double c0 = q.coef[0], c1 = q.coef[1], c2 = q.coef[2];
  const double er = s.e_ref;
  const std::array<double, 3> poly{s.f_ref + c0 - c1 * er + c2 * er * er, c1 - 2.0 * c2 * er, c2};
  if (std::abs(units::ghz_to_mhz(c2)) < alpha_epsilon)
    throw DegenerateQuadratic("fit_stark: curvature below threshold, vertex form unidentifiable", poly);

  StarkFit out;
  out.n_points = static_cast<int>(points.size());
  out.polynomial = poly;
  out.alpha_MHz_per_MVpm2 = -units::ghz_to_mhz(c2);
  out.e0_MVpm = er - c1 / (2.0 * c2);
  out.f_max_GHz = s.f_ref + c0 - c1 * c1 / (4.0 * c2);

  Eigen::Matrix3d jac;
  jac << 1.0, -c1 / (2.0 * c2), c1 * c1 / (4.0 * c2 * c2),  //
      0.0, 0.0, -units::mhz_per_ghz,                         //
      0.0, -1.0 / (2.0 * c2), c1 / (2.0 * c2 * c2);
  const Eigen::Matrix3d cov = jac * q.cov * jac.transpose();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.covariance[3 * r + c] = cov(r, c);
  out.f_max_sigma_GHz = std::sqrt(std::max(0.0, cov(0, 0)));
  out.alpha_sigma = std::sqrt(std::max(0.0, cov(1, 1)));
  out.e0_sigma_MVpm = std::sqrt(std::max(0.0, cov(2, 2)));
  out.reduced_chi2 = q.chi2 / static_cast<double>(points.size() - 3);
  out.alpha_sigma_systematic =
      std::abs(out.alpha_MHz_per_MVpm2) * propagate_field_uncertainty(opt.field_rel_uncertainty);
  out.e0_sigma_systematic_MVpm = std::abs(out.e0_MVpm) * opt.field_rel_uncertainty;
  return out;
}

struct LinearTermResult {
  double coefficient_MHz_per_MVpm = 0.0;
  double sigma_MHz_per_MVpm = 0.0;
  double significance = 0.0;
  double vertex_MVpm = 0.0;
};

/// Tests for a first-order contribution about the fitted vertex. A signed term b*(E - e0)
/// is indistinguishable from a shift of e0, so the refit uses the cusp b*|E - e0|, which
/// a pure parabola cannot absorb. Significance is b / sigma(b).
inline LinearTermResult linear_term_test(const std::vector<StarkPoint>& points, const StarkFitOptions& opt = {}) {
  const StarkFit quad = fit_stark(points, opt);
  detail::PreparedSeries s = detail::prepare_series(points, opt);
  detail::fit_centered_quadratic(s, points);  // settles the effective weights

  const auto n = s.e.size();
  Eigen::MatrixXd x(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = points[i].e_MVpm - quad.e0_MVpm;
    x(i, 0) = 1.0;
    x(i, 1) = std::abs(u);
    x(i, 2) = u * u;
  }
  const detail::WeightedLsq fit = detail::weighted_lsq(x, s.f, s.w, s.absolute);
  LinearTermResult r;
  r.vertex_MVpm = quad.e0_MVpm;
  r.coefficient_MHz_per_MVpm = units::ghz_to_mhz(fit.coef[1]);
  r.sigma_MHz_per_MVpm = units::ghz_to_mhz(std::sqrt(std::max(0.0, fit.cov(1, 1))));
  r.significance = r.sigma_MHz_per_MVpm > 0.0 ? r.coefficient_MHz_per_MVpm / r.sigma_MHz_per_MVpm : 0.0;
  return r;
}

}  // namespace sivstark

#endif  // SIVSTARK_FITTING_HPP
