#ifndef SIVSTARK_MULTIGRID_HPP
#define SIVSTARK_MULTIGRID_HPP

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

// Conjugate gradients preconditioned by a geometric multigrid V-cycle, for the
// node-centered finite-volume discretization of div(eps grad phi) = 0 on a uniform
// 2-D grid. Permittivity is piecewise constant per cell; a link between two nodes
// conducts with the mean permittivity of the (one or two) cells it borders. Outer
// boundaries are zero-flux. Nodes flagged in the mask carry Dirichlet values.
//
// The V-cycle uses red-black Gauss-Seidel with reversed color order on the way up,
// restriction equal to the transpose of bilinear prolongation and an exact sparse
// Cholesky solve on the coarsest level, so it is a symmetric preconditioner.

namespace sivstark::multigrid {

struct SolveResult {
  std::vector<double> solution;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

class Hierarchy {
 public:
  Hierarchy(int nx, int ny, const std::vector<double>& cell_eps, const std::vector<std::uint8_t>& fixed, int levels,
            int sweeps)
      : sweeps_(sweeps) {
    if (levels < 1) throw std::invalid_argument("multigrid: need at least one level");
    levels_.push_back(make_level(nx, ny, cell_eps, fixed));
    std::vector<double> eps = cell_eps;
    for (int l = 1; l < levels; ++l) {
      const Level& f = levels_.back();
      if ((f.nx - 1) % 2 != 0 || (f.ny - 1) % 2 != 0) break;
      const int cnx = (f.nx - 1) / 2 + 1, cny = (f.ny - 1) / 2 + 1;
      std::vector<double> ceps(static_cast<std::size_t>(cnx - 1) * (cny - 1));
      const int fcx = f.nx - 1;
      for (int J = 0; J < cny - 1; ++J)
        for (int I = 0; I < cnx - 1; ++I) {
          const auto at = [&](int i, int j) { return eps[static_cast<std::size_t>(j) * fcx + i]; };
          ceps[static_cast<std::size_t>(J) * (cnx - 1) + I] =
              0.25 * (at(2 * I, 2 * J) + at(2 * I + 1, 2 * J) + at(2 * I, 2 * J + 1) + at(2 * I + 1, 2 * J + 1));
        }
      std::vector<std::uint8_t> cfixed(static_cast<std::size_t>(cnx) * cny, 0);
      for (int J = 0; J < cny; ++J)
        for (int I = 0; I < cnx; ++I) {
          bool any = false;
          for (int dj = -1; dj <= 1 && !any; ++dj)
            for (int di = -1; di <= 1 && !any; ++di) {
              const int i = 2 * I + di, j = 2 * J + dj;
              if (i >= 0 && i < f.nx && j >= 0 && j < f.ny && f.fixed[f.idx(i, j)]) any = true;
            }
          cfixed[static_cast<std::size_t>(J) * cnx + I] = any ? 1 : 0;
        }
      levels_.push_back(make_level(cnx, cny, ceps, cfixed));
      eps = std::move(ceps);
    }
    factor_coarsest();
  }

  int levels() const { return static_cast<int>(levels_.size()); }

  /// dirichlet holds boundary values on fixed nodes; other entries are ignored.
  SolveResult solve(const std::vector<double>& dirichlet, double rel_tol, int max_iter) {
    Level& L = levels_.front();
    const std::size_t n = L.size();
    std::vector<double> d(n, 0.0);
    for (std::size_t k = 0; k < n; ++k)
      if (L.fixed[k]) d[k] = dirichlet[k];

    std::vector<double> b(n, 0.0);
    for (int j = 0; j < L.ny; ++j)
      for (int i = 0; i < L.nx; ++i) {
        const std::size_t k = L.idx(i, j);
        if (!L.fixed[k]) b[k] = L.neighbor_sum(d, i, j);
      }

    SolveResult res;
    const double bnorm = std::sqrt(dot(b, b));
    std::vector<double> u(n, 0.0);
    if (bnorm == 0.0) {
      res.solution = d;
      res.converged = true;
      return res;
    }

    std::vector<double> r = b, z(n), p(n), ap(n);
    precondition(r, z);
    p = z;
    double rz = dot(r, z);
    double rel = 1.0;
    int it = 0;
    while (it < max_iter) {
      apply(L, p, ap);
      const double alpha = rz / dot(p, ap);
      for (std::size_t k = 0; k < n; ++k) {
        u[k] += alpha * p[k];
        r[k] -= alpha * ap[k];
      }
      ++it;
      rel = std::sqrt(dot(r, r)) / bnorm;
      if (rel <= rel_tol) break;
      precondition(r, z);
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
    }

    // report the true residual, not the recurrence
    apply(L, u, ap);
    double rr = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double e = b[k] - ap[k];
      rr += e * e;
    }
    res.relative_residual = std::sqrt(rr) / bnorm;
    res.iterations = it;
    res.converged = res.relative_residual <= rel_tol * 1.0001;
    for (std::size_t k = 0; k < n; ++k) u[k] += d[k];
    res.solution = std::move(u);
    return res;
  }

 private:
  struct Level {
    int nx = 0, ny = 0;
    std::vector<double> cx, cy, diag;
    std::vector<std::uint8_t> fixed;
    std::vector<double> x, b, r;

    std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }

    double neighbor_sum(const std::vector<double>& v, int i, int j) const {
      const std::size_t k = idx(i, j);
      double s = 0.0;
      if (i > 0) s += cx[k - 1] * v[k - 1];
      if (i < nx - 1) s += cx[k] * v[k + 1];
      if (j > 0) s += cy[k - nx] * v[k - nx];
      if (j < ny - 1) s += cy[k] * v[k + nx];
      return s;
    }
  };

  static Level make_level(int nx, int ny, const std::vector<double>& eps, const std::vector<std::uint8_t>& fixed) {
    Level L;
    L.nx = nx;
    L.ny = ny;
    const std::size_t n = L.size();
    L.cx.assign(n, 0.0);
    L.cy.assign(n, 0.0);
    L.diag.assign(n, 0.0);
    L.fixed = fixed;
    L.x.assign(n, 0.0);
    L.b.assign(n, 0.0);
    L.r.assign(n, 0.0);
    const int ncx = nx - 1;
    auto e = [&](int i, int j) { return eps[static_cast<std::size_t>(j) * ncx + i]; };
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const std::size_t k = L.idx(i, j);
        if (i < nx - 1) L.cx[k] = 0.5 * ((j > 0 ? e(i, j - 1) : 0.0) + (j < ny - 1 ? e(i, j) : 0.0));
        if (j < ny - 1) L.cy[k] = 0.5 * ((i > 0 ? e(i - 1, j) : 0.0) + (i < nx - 1 ? e(i, j) : 0.0));
      }
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const std::size_t k = L.idx(i, j);
        double s = 0.0;
        if (i > 0) s += L.cx[k - 1];
        if (i < nx - 1) s += L.cx[k];
        if (j > 0) s += L.cy[k - nx];
        if (j < ny - 1) s += L.cy[k];
        L.diag[k] = s;
      }
    return L;
  }

  static double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
  }

  static void apply(const Level& L, const std::vector<double>& v, std::vector<double>& out) {
    for (int j = 0; j < L.ny; ++j)
      for (int i = 0; i < L.nx; ++i) {
        const std::size_t k = L.idx(i, j);
        out[k] = L.fixed[k] ? 0.0 : L.diag[k] * v[k] - L.neighbor_sum(v, i, j);
      }
  }

  static void sweep(Level& L, int color) {
    for (int j = 0; j < L.ny; ++j)
      for (int i = (j + color) & 1; i < L.nx; i += 2) {
        const std::size_t k = L.idx(i, j);
        if (L.fixed[k]) continue;
        L.x[k] = (L.b[k] + L.neighbor_sum(L.x, i, j)) / L.diag[k];
      }
  }

  static void residual(Level& L) {
    for (int j = 0; j < L.ny; ++j)
      for (int i = 0; i < L.nx; ++i) {
        const std::size_t k = L.idx(i, j);
        L.r[k] = L.fixed[k] ? 0.0 : L.b[k] - (L.diag[k] * L.x[k] - L.neighbor_sum(L.x, i, j));
      }
  }

  static void restrict_to(const Level& f, Level& c) {
    static constexpr double w[3] = {0.5, 1.0, 0.5};
    for (int J = 0; J < c.ny; ++J)
      for (int I = 0; I < c.nx; ++I) {
        const std::size_t K = c.idx(I, J);
        if (c.fixed[K]) {
          c.b[K] = 0.0;
          continue;
        }
        double s = 0.0;
        for (int dj = -1; dj <= 1; ++dj) {
          const int j = 2 * J + dj;
          if (j < 0 || j >= f.ny) continue;
          for (int di = -1; di <= 1; ++di) {
            const int i = 2 * I + di;
            if (i < 0 || i >= f.nx) continue;
            s += w[di + 1] * w[dj + 1] * f.r[f.idx(i, j)];
          }
        }
        c.b[K] = s;
      }
  }

  static void prolong_add(const Level& c, Level& f) {
    for (int j = 0; j < f.ny; ++j) {
      const int J0 = j / 2, J1 = (j + 1) / 2;
      for (int i = 0; i < f.nx; ++i) {
        const std::size_t k = f.idx(i, j);
        if (f.fixed[k]) continue;
        const int I0 = i / 2, I1 = (i + 1) / 2;
        f.x[k] += 0.25 * (c.x[c.idx(I0, J0)] + c.x[c.idx(I1, J0)] + c.x[c.idx(I0, J1)] + c.x[c.idx(I1, J1)]);
      }
    }
  }

  void factor_coarsest() {
    const Level& L = levels_.back();
    coarse_index_.assign(L.size(), -1);
    int n = 0;
    for (std::size_t k = 0; k < L.size(); ++k)
      if (!L.fixed[k]) coarse_index_[k] = n++;
    coarse_n_ = n;
    if (n == 0) return;
    std::vector<Eigen::Triplet<double>> t;
    for (int j = 0; j < L.ny; ++j)
      for (int i = 0; i < L.nx; ++i) {
        const std::size_t k = L.idx(i, j);
        const int row = coarse_index_[k];
        if (row < 0) continue;
        t.emplace_back(row, row, L.diag[k]);
        auto link = [&](std::size_t kn, double c) {
          if (coarse_index_[kn] >= 0) t.emplace_back(row, coarse_index_[kn], -c);
        };
        if (i > 0) link(k - 1, L.cx[k - 1]);
        if (i < L.nx - 1) link(k + 1, L.cx[k]);
        if (j > 0) link(k - L.nx, L.cy[k - L.nx]);
        if (j < L.ny - 1) link(k + L.nx, L.cy[k]);
      }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(t.begin(), t.end());
    coarse_solver_.compute(a);
    if (coarse_solver_.info() != Eigen::Success)
      throw std::runtime_error("multigrid: coarsest operator is singular (no Dirichlet nodes survive coarsening)");
  }

  void coarse_solve() {
    Level& L = levels_.back();
    std::fill(L.x.begin(), L.x.end(), 0.0);
    if (coarse_n_ == 0) return;
    Eigen::VectorXd rhs(coarse_n_);
    for (std::size_t k = 0; k < L.size(); ++k)
      if (coarse_index_[k] >= 0) rhs[coarse_index_[k]] = L.b[k];
    const Eigen::VectorXd sol = coarse_solver_.solve(rhs);
    for (std::size_t k = 0; k < L.size(); ++k)
      if (coarse_index_[k] >= 0) L.x[k] = sol[coarse_index_[k]];
  }

  void vcycle(std::size_t l) {
    if (l + 1 == levels_.size()) {
      coarse_solve();
      return;
    }
    Level& L = levels_[l];
    std::fill(L.x.begin(), L.x.end(), 0.0);
    for (int s = 0; s < sweeps_; ++s) {
      sweep(L, 0);
      sweep(L, 1);
    }
    residual(L);
    restrict_to(L, levels_[l + 1]);
    vcycle(l + 1);
    prolong_add(levels_[l + 1], L);
    for (int s = 0; s < sweeps_; ++s) {
      sweep(L, 1);
      sweep(L, 0);
    }
  }

  void precondition(const std::vector<double>& r, std::vector<double>& z) {
    Level& L = levels_.front();
    L.b = r;
    vcycle(0);
    z = L.x;
  }

  std::vector<Level> levels_;
  int sweeps_;
  std::vector<int> coarse_index_;
  int coarse_n_ = 0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> coarse_solver_;
};

}  // namespace sivstark::multigrid

#endif  // SIVSTARK_MULTIGRID_HPP
