#ifndef SIVSTARK_ERRORS_HPP
#define SIVSTARK_ERRORS_HPP

#include <array>
#include <stdexcept>
#include <string>

namespace sivstark {

/// Base class for numerical failures. Invalid arguments use std::invalid_argument.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Curvature too small for the vertex form (f_max, alpha, e0) to be identified.
/// Carries the polynomial coefficients c0 + c1*E + c2*E^2 (GHz, GHz/(MV/m), GHz/(MV/m)^2)
/// when they are available.
class DegenerateQuadratic : public NumericalError {
 public:
  explicit DegenerateQuadratic(const std::string& what, std::array<double, 3> poly = {0.0, 0.0, 0.0})
      : NumericalError(what), polynomial(poly) {}
  std::array<double, 3> polynomial;
};

class NoConvergence : public NumericalError {
 public:
  NoConvergence(int iters, double resid)
      : NumericalError("solver did not converge: " + std::to_string(iters) + " iterations, relative residual " +
                       std::to_string(resid)),
        iterations(iters),
        residual(resid) {}
  int iterations;
  double residual;
};

class OutOfDomain : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class LineOutsideScan : public NumericalError {
 public:
  LineOutsideScan(double v, double center)
      : NumericalError("line center " + std::to_string(center) + " GHz lies outside the scan window at " +
                       std::to_string(v) + " V"),
        voltage(v),
        center_GHz(center) {}
  double voltage;
  double center_GHz;
};

class NoPeakFound : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IllConditioned : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InsufficientSpread : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class Unreachable : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Malformed or incomplete run configuration; key_path names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key + ": " + what), key_path(std::move(key)) {}
  std::string key_path;
};

}  // namespace sivstark

#endif  // SIVSTARK_ERRORS_HPP
