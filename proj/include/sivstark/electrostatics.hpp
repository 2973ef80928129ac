#ifndef SIVSTARK_ELECTROSTATICS_HPP
#define SIVSTARK_ELECTROSTATICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sivstark/errors.hpp"
#include "sivstark/multigrid.hpp"
#include "sivstark/units.hpp"

// 2-D cross-section electrostatics of surface electrodes on a diamond half-space.
//
// Coordinates: x along the surface, measured from the inner edge of the grounded
// electrode (the gap spans 0 <= x <= gap); y points up out of the diamond, surface at
// y = 0. Lengths are in um, so V/um fields come out directly in MV/m.

namespace sivstark {

enum class ElectrodeLayout {
  coplanar_strips,  // two zero-thickness strips on the surface, grounded one on the left
  parallel_plates,  // two full-height plates bounding the domain, uniform permittivity
};

struct SimulationDomain {
  double width_um = 0.0;
  double height_above_um = 0.0;
  double depth_below_um = 0.0;
};

struct ElectrodeGeometry {
  ElectrodeLayout layout = ElectrodeLayout::coplanar_strips;
  double gap_um = 7.6;
  double electrode_width_um = 10.0;
  double applied_voltage_V = 10.0;
  double epsilon_diamond = 5.7;
  /// Zero entries are replaced by the defaults of resolved_domain().
  SimulationDomain domain{};
};

inline ElectrodeGeometry parallel_plate_geometry(double separation_um, double voltage_V, double epsilon) {
  ElectrodeGeometry g;
  g.layout = ElectrodeLayout::parallel_plates;
  g.gap_um = separation_um;
  g.electrode_width_um = 0.0;
  g.applied_voltage_V = voltage_V;
  g.epsilon_diamond = epsilon;
  return g;
}

/// Default domain: two gaps of margin beside the electrodes, two gaps above and below.
inline SimulationDomain resolved_domain(const ElectrodeGeometry& g) {
  SimulationDomain d = g.domain;
  if (g.layout == ElectrodeLayout::parallel_plates) {
    d.width_um = g.gap_um;
    if (d.height_above_um <= 0.0) d.height_above_um = g.gap_um;
    if (d.depth_below_um <= 0.0) d.depth_below_um = g.gap_um;
    return d;
  }
  if (d.width_um <= 0.0) d.width_um = g.gap_um + 2.0 * g.electrode_width_um + 4.0 * g.gap_um;
  if (d.height_above_um <= 0.0) d.height_above_um = 2.0 * g.gap_um;
  if (d.depth_below_um <= 0.0) d.depth_below_um = 2.0 * g.gap_um;
  return d;
}

inline void validate(const ElectrodeGeometry& g) {
  if (!(g.gap_um > 0.0)) throw std::invalid_argument("ElectrodeGeometry: gap must be positive");
  if (!(g.epsilon_diamond >= 1.0)) throw std::invalid_argument("ElectrodeGeometry: epsilon must be >= 1");
  if (!std::isfinite(g.applied_voltage_V)) throw std::invalid_argument("ElectrodeGeometry: voltage not finite");
  if (g.layout == ElectrodeLayout::parallel_plates) return;
  if (!(g.electrode_width_um > 0.0))
    throw std::invalid_argument("ElectrodeGeometry: electrode width must be positive");
  const SimulationDomain d = resolved_domain(g);
  const double margin = 0.5 * (d.width_um - g.gap_um - 2.0 * g.electrode_width_um);
  const double need = 2.0 * g.gap_um * (1.0 - 1e-12);
  if (margin < need || d.height_above_um < need || d.depth_below_um < need)
    throw std::invalid_argument("ElectrodeGeometry: domain must extend at least two gaps beyond the electrodes");
}

struct GridSpec {
  int nx = 0;  // nodes along x
  int ny = 0;  // nodes along y
  double h_um = 0.0;
  double x0_um = 0.0;  // coordinates of node (0, 0)
  double y0_um = 0.0;
  int surface_row = 0;

  double x(int i) const { return x0_um + i * h_um; }
  double y(int j) const { return y0_um + j * h_um; }
  double x_max() const { return x(nx - 1); }
  double y_max() const { return y(ny - 1); }
  int cells_x() const { return nx - 1; }
  int cells_y() const { return ny - 1; }
};

struct ConvergenceReport {
  int iterations = 0;
  double relative_residual = 0.0;
  int multigrid_levels = 0;
};

/// Solved potential on grid nodes and field components on cell centers.
struct FieldMap {
  ElectrodeGeometry geometry;
  GridSpec grid;
  std::vector<double> potential;  // V, node (i, j) at j * nx + i
  std::vector<double> ex;         // MV/m, cell (i, j) at j * (nx - 1) + i
  std::vector<double> ey;
  std::vector<std::uint8_t> electrode;  // node mask, 1 on Dirichlet nodes
  ConvergenceReport report;

  double phi(int i, int j) const { return potential[static_cast<std::size_t>(j) * grid.nx + i]; }
  double cell_ex(int i, int j) const { return ex[static_cast<std::size_t>(j) * grid.cells_x() + i]; }
  double cell_ey(int i, int j) const { return ey[static_cast<std::size_t>(j) * grid.cells_x() + i]; }
  bool is_electrode(int i, int j) const { return electrode[static_cast<std::size_t>(j) * grid.nx + i] != 0; }

  /// Relative permittivity of cell (i, j).
  double cell_epsilon(int /*i*/, int j) const {
    if (geometry.layout == ElectrodeLayout::parallel_plates) return geometry.epsilon_diamond;
    return j < grid.surface_row ? geometry.epsilon_diamond : 1.0;
  }
};

struct SolverOptions {
  int cells_per_gap = 304;  // 25 nm at the 7.6 um gap
  double relative_tolerance = 1e-8;
  int max_iterations = 200;
  int max_levels = 7;
  int smoothing_sweeps = 2;
};

namespace detail {

inline int round_up(int n, int m) { return ((n + m - 1) / m) * m; }

inline int trailing_zeros(int n) {
  int z = 0;
  while (n > 0 && n % 2 == 0) {
    n /= 2;
    ++z;
  }
  return z;
}

inline int coarsening_depth(int cells_x, int cells_y, int max_levels) {
  int depth = 0;
  while (depth + 1 < max_levels && (std::min(cells_x, cells_y) >> (depth + 1)) >= 4) ++depth;
  return depth;
}

}  // namespace detail

/// Solve div(eps grad phi) = 0 with Dirichlet electrodes and zero-flux outer boundaries.
inline FieldMap solve_potential(const ElectrodeGeometry& g, const SolverOptions& opt = {}) {
  validate(g);
  if (opt.cells_per_gap < 64) throw std::invalid_argument("solve_potential: need at least 64 cells across the gap");

  const SimulationDomain dom = resolved_domain(g);
  const double h = g.gap_um / opt.cells_per_gap;
  auto cells_for = [h](double len) { return static_cast<int>(std::ceil(len / h - 1e-9)); };

  FieldMap map;
  map.geometry = g;
  GridSpec& grid = map.grid;
  grid.h_um = h;

  int depth = 0;
  int cx_cells = 0;
  int i_ground = 0;  // node index of the grounded electrode's inner edge
  int n_width = 0;
  const int raw_below = cells_for(dom.depth_below_um);
  const int raw_above = cells_for(dom.height_above_um);

  if (g.layout == ElectrodeLayout::parallel_plates) {
    cx_cells = opt.cells_per_gap;
    depth = std::min(detail::coarsening_depth(cx_cells, raw_below + raw_above, opt.max_levels),
                     detail::trailing_zeros(cx_cells));
  } else {
    n_width = std::max(1, static_cast<int>(std::lround(g.electrode_width_um / h)));
    const int n_margin = cells_for(0.5 * (dom.width_um - g.gap_um - 2.0 * g.electrode_width_um));
    const int raw_x = opt.cells_per_gap + 2 * n_width + 2 * n_margin;
    depth = detail::coarsening_depth(raw_x, raw_below + raw_above, opt.max_levels);
    const int m = 1 << depth;
    const int pad = detail::round_up(raw_x, m) - raw_x;
    cx_cells = raw_x + pad;
    i_ground = n_margin + pad / 2 + n_width;
  }
  const int m = 1 << depth;
  const int n_below = detail::round_up(raw_below, m);
  const int n_above = detail::round_up(raw_above, m);

  grid.nx = cx_cells + 1;
  grid.ny = n_below + n_above + 1;
  grid.surface_row = n_below;
  grid.x0_um = -i_ground * h;
  grid.y0_um = -n_below * h;

  const std::size_t nodes = static_cast<std::size_t>(grid.nx) * grid.ny;
  std::vector<double> dirichlet(nodes, 0.0);
  map.electrode.assign(nodes, 0);
  auto fix = [&](int i, int j, double v) {
    const std::size_t k = static_cast<std::size_t>(j) * grid.nx + i;
    map.electrode[k] = 1;
    dirichlet[k] = v;
  };
  if (g.layout == ElectrodeLayout::parallel_plates) {
    for (int j = 0; j < grid.ny; ++j) {
      fix(0, j, 0.0);
      fix(grid.nx - 1, j, g.applied_voltage_V);
    }
  } else {
    const int j = grid.surface_row;
    for (int i = i_ground - n_width; i <= i_ground; ++i) fix(i, j, 0.0);
    const int i_driven = i_ground + opt.cells_per_gap;
    for (int i = i_driven; i <= i_driven + n_width; ++i) fix(i, j, g.applied_voltage_V);
  }

  std::vector<double> eps(static_cast<std::size_t>(grid.cells_x()) * grid.cells_y());
  for (int j = 0; j < grid.cells_y(); ++j)
    for (int i = 0; i < grid.cells_x(); ++i)
      eps[static_cast<std::size_t>(j) * grid.cells_x() + i] = map.cell_epsilon(i, j);

  multigrid::Hierarchy mg(grid.nx, grid.ny, eps, map.electrode, depth + 1, opt.smoothing_sweeps);
  const auto result = mg.solve(dirichlet, opt.relative_tolerance, opt.max_iterations);
  map.report = {result.iterations, result.relative_residual, depth + 1};
  if (!result.converged) throw NoConvergence(result.iterations, result.relative_residual);
  map.potential = result.solution;

  const int ncx = grid.cells_x();
  map.ex.resize(static_cast<std::size_t>(ncx) * grid.cells_y());
  map.ey.resize(map.ex.size());
  const double inv = units::mvpm_per_v_per_um / (2.0 * h);
  for (int j = 0; j < grid.cells_y(); ++j) {
    for (int i = 0; i < ncx; ++i) {
      const double p00 = map.phi(i, j), p10 = map.phi(i + 1, j);
      const double p01 = map.phi(i, j + 1), p11 = map.phi(i + 1, j + 1);
      const std::size_t c = static_cast<std::size_t>(j) * ncx + i;
      map.ex[c] = -((p10 - p00) + (p11 - p01)) * inv;
      map.ey[c] = -((p01 - p00) + (p11 - p10)) * inv;
    }
  }
  return map;
}

struct FieldVector {
  double ex_MVpm = 0.0;
  double ey_MVpm = 0.0;
  double magnitude() const { return std::hypot(ex_MVpm, ey_MVpm); }
};

/// Voltage-to-local-field conversion at a fixed point below the surface.
struct FieldProbe {
  double x_um = 1.9;  // from the grounded electrode's inner edge
  double depth_nm = 100.0;
  double kappa_MVpm_per_V = 0.0;
};

/// Field at (x, depth) by bilinear interpolation of the cell-centered components.
inline FieldVector field_at(const FieldMap& map, double x_um, double depth_nm) {
  const GridSpec& gr = map.grid;
  const double y = -units::nm_to_um(depth_nm);
  const double tol = 1e-9 * gr.h_um;
  if (!(x_um >= gr.x0_um - tol && x_um <= gr.x_max() + tol && y >= gr.y0_um - tol && y <= gr.y_max() + tol))
    throw OutOfDomain("field_at: point outside the solved domain");

  auto locate = [](double s, int ncells, int& i0, double& t) {
    const double f = s - 0.5;  // cell centers sit at half-integer positions
    i0 = std::clamp(static_cast<int>(std::floor(f)), 0, ncells - 2);
    t = std::clamp(f - i0, 0.0, 1.0);
  };
  int i0 = 0, j0 = 0;
  double tx = 0.0, ty = 0.0;
  locate((x_um - gr.x0_um) / gr.h_um, gr.cells_x(), i0, tx);
  locate((y - gr.y0_um) / gr.h_um, gr.cells_y(), j0, ty);

  auto lerp2 = [&](auto&& cell) {
    return (1 - tx) * (1 - ty) * cell(i0, j0) + tx * (1 - ty) * cell(i0 + 1, j0) + (1 - tx) * ty * cell(i0, j0 + 1) +
           tx * ty * cell(i0 + 1, j0 + 1);
  };
  return {lerp2([&](int i, int j) { return map.cell_ex(i, j); }),
          lerp2([&](int i, int j) { return map.cell_ey(i, j); })};
}

inline FieldVector field_at(const FieldMap& map, const FieldProbe& probe) {
  return field_at(map, probe.x_um, probe.depth_nm);
}

/// Lorentz local-field enhancement inside a dielectric.
inline double lorentz_local_field(double e_ext_MVpm, double epsilon) {
  if (!(epsilon >= 1.0)) throw std::invalid_argument("lorentz_local_field: epsilon must be >= 1");
  return e_ext_MVpm * (epsilon + 2.0) / 3.0;
}

struct KappaCalibration {
  FieldProbe probe;
  double reference_voltage_V = 0.0;
  FieldVector external;            // at the reference voltage
  double local_field_MVpm = 0.0;   // Lorentz-corrected |E| at the reference voltage
  ConvergenceReport convergence;
};

/// kappa from an already solved map. The map's applied voltage is the reference.
inline KappaCalibration calibrate_kappa(const FieldMap& map, double x_um, double depth_nm) {
  const double v_ref = map.geometry.applied_voltage_V;
  if (v_ref == 0.0) throw std::invalid_argument("calibrate_kappa: reference voltage must be non-zero");
  KappaCalibration cal;
  cal.reference_voltage_V = v_ref;
  cal.external = field_at(map, x_um, depth_nm);
  const bool in_dielectric = map.geometry.layout == ElectrodeLayout::parallel_plates || depth_nm > 0.0;
  const double eps = in_dielectric ? map.geometry.epsilon_diamond : 1.0;
  cal.local_field_MVpm = lorentz_local_field(cal.external.magnitude(), eps);
  cal.probe = {x_um, depth_nm, cal.local_field_MVpm / std::abs(v_ref)};
  cal.convergence = map.report;
  return cal;
}

inline KappaCalibration calibrate_kappa(ElectrodeGeometry g, double x_um, double depth_nm,
                                        const SolverOptions& opt = {}) {
  if (g.applied_voltage_V == 0.0) g.applied_voltage_V = 1.0;
  return calibrate_kappa(solve_potential(g, opt), x_um, depth_nm);
}

struct LineCutSample {
  double x_um;
  FieldVector field;
};

/// Field along a horizontal line at fixed depth.
inline std::vector<LineCutSample> line_cut(const FieldMap& map, double depth_nm, double x_from_um, double x_to_um,
                                           int samples) {
  if (samples < 2) throw std::invalid_argument("line_cut: need at least two samples");
  std::vector<LineCutSample> out;
  out.reserve(samples);
  for (int k = 0; k < samples; ++k) {
    const double x = x_from_um + (x_to_um - x_from_um) * k / (samples - 1);
    out.push_back({x, field_at(map, x, depth_nm)});
  }
  return out;
}

}  // namespace sivstark

#endif  // SIVSTARK_ELECTROSTATICS_HPP
