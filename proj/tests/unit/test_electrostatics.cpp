#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "sivstark/electrostatics.hpp"
#include "sivstark/errors.hpp"

using namespace sivstark;

namespace {

SolverOptions at(int cells) {
  SolverOptions o;
  o.cells_per_gap = cells;
  return o;
}

const FieldMap& coarse_default_map() {
  static const FieldMap m = solve_potential(ElectrodeGeometry{}, at(128));
  return m;
}

}  // namespace

TEST(ParallelPlates, UniformField) {
  const FieldMap m = solve_potential(parallel_plate_geometry(1.0, 1.0, 1.0), at(64));
  for (double x : {0.05, 0.3, 0.5, 0.77, 0.95})
    for (double depth : {-800.0, -100.0, 0.0, 100.0, 500.0, 900.0}) {
      const FieldVector f = field_at(m, x, depth);
      EXPECT_NEAR(f.magnitude(), 1.0, 0.005) << x << " " << depth;
      EXPECT_NEAR(f.ey_MVpm, 0.0, 1e-6);
    }
}

TEST(ParallelPlates, KappaIsVOverD) {
  const KappaCalibration c = calibrate_kappa(parallel_plate_geometry(1.0, 1.0, 1.0), 0.5, 100.0, at(64));
  EXPECT_NEAR(c.probe.kappa_MVpm_per_V, 1.0, 1e-6);
  // layered dielectric with the field along the interface stays uniform
  const KappaCalibration d = calibrate_kappa(parallel_plate_geometry(2.0, 3.0, 5.7), 1.0, 300.0, at(64));
  EXPECT_NEAR(d.external.magnitude(), 1.5, 1.5e-6);
  EXPECT_NEAR(d.probe.kappa_MVpm_per_V, 0.5 * (5.7 + 2.0) / 3.0, 1e-6);
}

TEST(Solver, ConvergenceReportAndDirichletNodes) {
  const FieldMap& m = coarse_default_map();
  EXPECT_LE(m.report.relative_residual, 1e-8);
  EXPECT_GT(m.report.iterations, 0);
  int fixed = 0;
  for (int j = 0; j < m.grid.ny; ++j)
    for (int i = 0; i < m.grid.nx; ++i)
      if (m.is_electrode(i, j)) {
        ++fixed;
        EXPECT_TRUE(m.phi(i, j) == 0.0 || m.phi(i, j) == m.geometry.applied_voltage_V);
      }
  EXPECT_GT(fixed, 0);
}

TEST(Solver, MaximumPrinciple) {
  const FieldMap& m = coarse_default_map();
  for (double p : m.potential) {
    EXPECT_GE(p, -1e-9);
    EXPECT_LE(p, 10.0 + 1e-9);
  }
}

TEST(Solver, VoltageLinearity) {
  ElectrodeGeometry g;
  const FieldMap a = solve_potential(g, at(128));
  g.applied_voltage_V = 20.0;
  const FieldMap b = solve_potential(g, at(128));
  double emax = 0.0;
  for (std::size_t k = 0; k < a.ex.size(); ++k) emax = std::max(emax, std::hypot(a.ex[k], a.ey[k]));
  double worst = 0.0;
  for (std::size_t k = 0; k < a.ex.size(); ++k) {
    worst = std::max(worst, std::abs(b.ex[k] - 2.0 * a.ex[k]));
    worst = std::max(worst, std::abs(b.ey[k] - 2.0 * a.ey[k]));
  }
  // relative tolerance 1e-8 on the residual; allow the condition number some room
  EXPECT_LT(worst / (2.0 * emax), 1e-6);
}

TEST(Solver, ChargeBalanceWithNeumannWalls) {
  const FieldMap& m = coarse_default_map();
  const auto q = oracle::electrode_charges(m);
  EXPECT_GT(q[1], 0.0);
  EXPECT_LT(q[0], 0.0);
  EXPECT_LT(std::abs(q[0] + q[1]) / q[1], 1e-6);
}

TEST(Solver, CapacitanceLinearInVoltage) {
  ElectrodeGeometry g;
  g.applied_voltage_V = 3.0;
  const auto q3 = oracle::electrode_charges(solve_potential(g, at(64)));
  g.applied_voltage_V = 12.0;
  const auto q12 = oracle::electrode_charges(solve_potential(g, at(64)));
  EXPECT_NEAR(q12[1] / q3[1], 4.0, 1e-5);
}

TEST(Solver, AgreesWithConformalMapForWideElectrodes) {
  ElectrodeGeometry g;
  g.electrode_width_um = 6.0 * g.gap_um;
  const FieldMap m = solve_potential(g, at(128));
  struct P {
    double x_um, depth_nm;
  };
  for (P p : {P{1.9, 100}, P{3.8, 100}, P{5.7, 100}, P{3.8, 1000}, P{1.0, 2000}}) {
    const auto ref = oracle::coplanar_field(p.x_um, -p.depth_nm * 1e-3, g.gap_um, g.applied_voltage_V);
    const FieldVector f = field_at(m, p.x_um, p.depth_nm);
    const double ref_mag = std::hypot(ref[0], ref[1]);
    EXPECT_NEAR(f.magnitude() / ref_mag, 1.0, 0.02) << p.x_um << " " << p.depth_nm;
    EXPECT_NEAR(f.ex_MVpm, ref[0], 0.02 * ref_mag);
    EXPECT_NEAR(f.ey_MVpm, ref[1], 0.02 * ref_mag);
  }
}

TEST(Solver, MeshRefinementBelowTwoPercent) {
  const ElectrodeGeometry g;
  const double coarse = field_at(solve_potential(g, at(152)), 1.9, 100.0).magnitude();
  const double fine = field_at(solve_potential(g, at(304)), 1.9, 100.0).magnitude();
  EXPECT_LT(std::abs(fine - coarse) / fine, 0.02);
}

TEST(FieldAt, MirrorSymmetryAboutGapCenter) {
  const FieldMap& m = coarse_default_map();
  const double gap = m.geometry.gap_um;
  const double scale = field_at(m, 0.5 * gap, 100.0).magnitude();
  for (double x : {0.4, 1.5, 1.9, 2.4, 3.0})
    for (double depth : {50.0, 100.0, 400.0}) {
      const FieldVector l = field_at(m, x, depth), r = field_at(m, gap - x, depth);
      EXPECT_NEAR(l.ex_MVpm, r.ex_MVpm, 2e-3 * scale) << x;
      EXPECT_NEAR(l.ey_MVpm, -r.ey_MVpm, 2e-3 * scale) << x;
    }
  EXPECT_NEAR(field_at(m, 0.5 * gap, 100.0).ey_MVpm, 0.0, 2e-3 * scale);
}

TEST(FieldAt, StrongestNearElectrodeEdges) {
  const FieldMap& m = coarse_default_map();
  const double gap = m.geometry.gap_um;
  const auto cut = line_cut(m, 30.0, 0.0, gap, 77);
  const double mid = field_at(m, 0.5 * gap, 30.0).magnitude();
  EXPECT_GT(cut.front().field.magnitude(), 2.0 * mid);
  EXPECT_GT(cut.back().field.magnitude(), 2.0 * mid);
  // minimum sits in the middle of the gap
  std::size_t kmin = 0;
  for (std::size_t k = 1; k < cut.size(); ++k)
    if (cut[k].field.magnitude() < cut[kmin].field.magnitude()) kmin = k;
  EXPECT_NEAR(cut[kmin].x_um, 0.5 * gap, 0.3);
}

TEST(FieldAt, OutOfDomain) {
  const FieldMap& m = coarse_default_map();
  EXPECT_THROW(field_at(m, m.grid.x_max() + 1.0, 100.0), OutOfDomain);
  EXPECT_THROW(field_at(m, 1.9, 1e9), OutOfDomain);
}

TEST(Lorentz, Examples) {
  EXPECT_NEAR(lorentz_local_field(0.82, 5.7), 2.10, 0.01);
  EXPECT_DOUBLE_EQ(lorentz_local_field(0.37, 1.0), 0.37);
  EXPECT_NEAR(lorentz_local_field(1.0, 5.7), 2.5667, 5e-5);
  EXPECT_THROW(lorentz_local_field(1.0, 0.5), std::invalid_argument);
  double prev = 0.0;
  for (double eps = 1.0; eps < 20.0; eps += 0.5) {
    const double v = lorentz_local_field(1.3, eps);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(Kappa, IsLocalFieldPerVolt) {
  const KappaCalibration c = calibrate_kappa(coarse_default_map(), 1.9, 100.0);
  EXPECT_NEAR(c.probe.kappa_MVpm_per_V * 10.0, lorentz_local_field(c.external.magnitude(), 5.7), 1e-12);
  EXPECT_EQ(c.reference_voltage_V, 10.0);
}

TEST(Kappa, VoltageIndependent) {
  ElectrodeGeometry g;
  g.applied_voltage_V = 0.0;  // falls back to a 1 V reference
  const double k1 = calibrate_kappa(g, 1.9, 100.0, at(64)).probe.kappa_MVpm_per_V;
  g.applied_voltage_V = -37.0;
  const double k2 = calibrate_kappa(g, 1.9, 100.0, at(64)).probe.kappa_MVpm_per_V;
  EXPECT_NEAR(k1, k2, 1e-6 * k1);
}

TEST(Geometry, Validation) {
  ElectrodeGeometry g;
  g.gap_um = 0.0;
  EXPECT_THROW(validate(g), std::invalid_argument);
  g = {};
  g.epsilon_diamond = 0.9;
  EXPECT_THROW(validate(g), std::invalid_argument);
  g = {};
  g.domain.height_above_um = 1.0;
  EXPECT_THROW(validate(g), std::invalid_argument);
  g = {};
  g.domain.width_um = g.gap_um + 2 * g.electrode_width_um + 3.0 * g.gap_um;
  EXPECT_THROW(validate(g), std::invalid_argument);
  EXPECT_THROW(solve_potential(ElectrodeGeometry{}, at(32)), std::invalid_argument);
}

TEST(Solver, NoConvergenceWhenCapped) {
  SolverOptions o = at(64);
  o.max_iterations = 1;
  o.relative_tolerance = 1e-14;
  try {
    solve_potential(ElectrodeGeometry{}, o);
    FAIL() << "expected NoConvergence";
  } catch (const NoConvergence& e) {
    EXPECT_EQ(e.iterations, 1);
    EXPECT_GT(e.residual, 1e-14);
  }
}
