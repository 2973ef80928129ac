#ifndef SIVSTARK_GOLDEN_SECTION_HPP
#define SIVSTARK_GOLDEN_SECTION_HPP

#include <cmath>
#include <utility>

namespace sivstark {

/// Minimizes a unimodal f on [a, b]. Returns (argmin, f(argmin)).
template <typename F>
std::pair<double, double> golden_section_minimize(F&& f, double a, double b, double tol, int max_iter = 200) {
  constexpr double inv_phi = 0.6180339887498949;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < max_iter && (b - a) > tol; ++i) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  const double fx = f(x);
  if (fc < fx && fc <= fd) return {c, fc};
  if (fd < fx) return {d, fd};
  return {x, fx};
}

}  // namespace sivstark

#endif  // SIVSTARK_GOLDEN_SECTION_HPP
