#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mollhelm/grid.hpp"
#include "mollhelm/problem.hpp"

namespace mollhelm {

inline double lambda_value(double gamma, double k, double dy, double eta_val) {
  return 2.0 + 2.0 * gamma - k * k * dy * dy * eta_val;
}

/// Lambda_j^n = 2 + 2*gamma - k^2 dy^2 eta(x_j, y_n), 0-based indices.
inline double lambda_coeff(const Grid2D& g, const CauchyCase& c, int j, int n) {
  if (j < 0 || j >= g.nx || n < 0 || n >= g.ny)
    throw std::out_of_range("lambda_coeff: node index out of range");
  return lambda_value(g.gamma, c.k, g.dy, c.eta(g.x(j), g.y(n)));
}

/// One nearly-tridiagonal level matrix A_n.
///
/// Interior row j is (gamma, -Lambda_j, gamma); the first and last rows use
/// the 4-node one-sided second-derivative stencil:
///   (-Lambda_0 + 4g, -5g, 4g, -g)  and its mirror image.
/// The whole matrix is determined by gamma and the Lambda vector, so that is
/// all we store; rows are synthesized on application.
class LevelMatrix {
 public:
  LevelMatrix() = default;
  LevelMatrix(int level, double gamma, Eigen::VectorXd lambda)
      : level_(level), gamma_(gamma), lambda_(std::move(lambda)) {}

  int level() const { return level_; }
  int size() const { return static_cast<int>(lambda_.size()); }
  double gamma() const { return gamma_; }
  const Eigen::VectorXd& lambda() const { return lambda_; }

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& u) const {
    const int n = size();
    if (u.size() != n) throw std::invalid_argument("LevelMatrix::apply: size mismatch");
    Eigen::VectorXd out(n);
    const double g = gamma_;
    out[0] = (-lambda_[0] + 4.0 * g) * u[0] - 5.0 * g * u[1] + 4.0 * g * u[2] - g * u[3];
    for (int j = 1; j < n - 1; ++j)
      out[j] = g * u[j - 1] - lambda_[j] * u[j] + g * u[j + 1];
    out[n - 1] = (-lambda_[n - 1] + 4.0 * g) * u[n - 1] - 5.0 * g * u[n - 2] +
                 4.0 * g * u[n - 3] - g * u[n - 4];
    return out;
  }

  /// A_n^T v, needed for the normal-equation right-hand side.
  Eigen::VectorXd apply_transpose(const Eigen::Ref<const Eigen::VectorXd>& v) const {
    return dense().transpose() * v;
  }

  Eigen::MatrixXd dense() const {
    const int n = size();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    const double g = gamma_;
    m(0, 0) = -lambda_[0] + 4.0 * g;
    m(0, 1) = -5.0 * g;
    m(0, 2) = 4.0 * g;
    m(0, 3) = -g;
    for (int j = 1; j < n - 1; ++j) {
      m(j, j - 1) = g;
      m(j, j) = -lambda_[j];
      m(j, j + 1) = g;
    }
    m(n - 1, n - 1) = -lambda_[n - 1] + 4.0 * g;
    m(n - 1, n - 2) = -5.0 * g;
    m(n - 1, n - 3) = 4.0 * g;
    m(n - 1, n - 4) = -g;
    return m;
  }

 private:
  int level_ = 0;
  double gamma_ = 0.0;
  Eigen::VectorXd lambda_;
};

/// level is the 0-based y-index the stencil is centered on; valid levels are
/// 0..ny-2 (the last grid level has no difference equation of its own).
inline LevelMatrix assemble_level(const Grid2D& g, const CauchyCase& c, int level) {
  if (level < 0 || level > g.ny - 2)
    throw std::out_of_range("assemble_level: level must be in [0, ny-2]");
  Eigen::VectorXd lam(g.nx);
  for (int j = 0; j < g.nx; ++j) lam[j] = lambda_coeff(g, c, j, level);
  return LevelMatrix(level, g.gamma, std::move(lam));
}

/// Block system A U = B with the block rows
///   [ I            ]   (Dirichlet data)
///   [ A_0  2I      ]   (Neumann data folded in via the ghost level)
///   [ I  A_m  I    ]   (marching relations, m = 1..ny-2)
/// stored as the list of level matrices; identity blocks are structural.
class ForwardSystem {
 public:
  static ForwardSystem build(const Grid2D& g, const CauchyCase& c) {
    ForwardSystem s;
    s.grid_ = g;
    s.levels_.reserve(g.ny - 1);
    for (int m = 0; m <= g.ny - 2; ++m) s.levels_.push_back(assemble_level(g, c, m));
    return s;
  }

  const Grid2D& grid() const { return grid_; }
  const LevelMatrix& level(int m) const { return levels_.at(m); }

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& u) const {
    const int nx = grid_.nx, ny = grid_.ny;
    if (u.size() != grid_.size()) throw std::invalid_argument("apply_forward: size mismatch");
    Eigen::VectorXd out(u.size());
    auto blk = [nx](const auto& v, int m) { return v.segment(m * nx, nx); };
    out.segment(0, nx) = blk(u, 0);
    out.segment(nx, nx) = levels_[0].apply(blk(u, 0)) + 2.0 * blk(u, 1);
    for (int m = 2; m < ny; ++m)
      out.segment(m * nx, nx) =
          blk(u, m - 2) + levels_[m - 1].apply(blk(u, m - 1)) + blk(u, m);
    return out;
  }

  Eigen::VectorXd apply_transpose(const Eigen::Ref<const Eigen::VectorXd>& v) const {
    const int nx = grid_.nx, ny = grid_.ny;
    if (v.size() != grid_.size()) throw std::invalid_argument("apply_transpose: size mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
    auto blk = [nx](const auto& w, int m) { return w.segment(m * nx, nx); };
    // column c of A holds: its diagonal block (I, 2I or I), A_c from row c+1,
    // and I from row c+2.
    out.segment(0, nx) = blk(v, 0) + levels_[0].apply_transpose(blk(v, 1));
    if (ny > 2) out.segment(0, nx) += blk(v, 2);
    for (int c = 1; c < ny; ++c) {
      Eigen::VectorXd acc = (c == 1 ? 2.0 : 1.0) * blk(v, c);
      if (c + 1 < ny) acc += levels_[c].apply_transpose(blk(v, c + 1));
      if (c + 2 < ny) acc += blk(v, c + 2);
      out.segment(c * nx, nx) = acc;
    }
    return out;
  }

  /// Exact block forward substitution through the lower-triangular system.
  /// Fast, but amplifies data perturbations exponentially in y.
  Eigen::VectorXd march_solve(const Eigen::Ref<const Eigen::VectorXd>& rhs) const {
    const int nx = grid_.nx, ny = grid_.ny;
    if (rhs.size() != grid_.size()) throw std::invalid_argument("march_solve: size mismatch");
    Eigen::VectorXd u(rhs.size());
    auto blk = [nx](auto& w, int m) { return w.segment(m * nx, nx); };
    blk(u, 0) = rhs.segment(0, nx);
    blk(u, 1) = (rhs.segment(nx, nx) - levels_[0].apply(blk(u, 0))) / 2.0;
    for (int m = 2; m < ny; ++m)
      blk(u, m) = rhs.segment(m * nx, nx) - levels_[m - 1].apply(blk(u, m - 1)) - blk(u, m - 2);
    return u;
  }

  Eigen::SparseMatrix<double> sparse() const {
    const int nx = grid_.nx, ny = grid_.ny;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<size_t>(5 * nx) * ny);
    auto add_identity = [&](int br, int bc, double w) {
      for (int j = 0; j < nx; ++j) t.emplace_back(br * nx + j, bc * nx + j, w);
    };
    auto add_level = [&](int br, int bc, const LevelMatrix& L) {
      const Eigen::MatrixXd d = L.dense();
      for (int i = 0; i < nx; ++i)
        for (int j = 0; j < nx; ++j)
          if (d(i, j) != 0.0) t.emplace_back(br * nx + i, bc * nx + j, d(i, j));
    };
    add_identity(0, 0, 1.0);
    add_level(1, 0, levels_[0]);
    add_identity(1, 1, 2.0);
    for (int m = 2; m < ny; ++m) {
      add_identity(m, m - 2, 1.0);
      add_level(m, m - 1, levels_[m - 1]);
      add_identity(m, m, 1.0);
    }
    Eigen::SparseMatrix<double> A(grid_.size(), grid_.size());
    A.setFromTriplets(t.begin(), t.end());
    return A;
  }

  /// A^T A, assembled sparse (block pentadiagonal).
  Eigen::SparseMatrix<double> normal_matrix() const {
    const Eigen::SparseMatrix<double> A = sparse();
    Eigen::SparseMatrix<double> At = A.transpose();
    return At * A;
  }

 private:
  Grid2D grid_;
  std::vector<LevelMatrix> levels_;
};

/// B = (g; dy^2 S^1 + 2 dy f; dy^2 S^2; ...; dy^2 S^{ny-1}), with S^m the
/// source sampled on y-level m-1 (0-based level m-1).
inline Eigen::VectorXd assemble_rhs(const Grid2D& g, const CauchyCase& c,
                                    const Eigen::Ref<const Eigen::VectorXd>& g_vec,
                                    const Eigen::Ref<const Eigen::VectorXd>& f_vec) {
  if (g_vec.size() != g.nx || f_vec.size() != g.nx)
    throw std::invalid_argument("assemble_rhs: boundary vector length mismatch");
  Eigen::VectorXd b(g.size());
  b.segment(0, g.nx) = g_vec;
  const double dy2 = g.dy * g.dy;
  for (int j = 0; j < g.nx; ++j)
    b[g.nx + j] = dy2 * c.source(g.x(j), 0.0) + 2.0 * g.dy * f_vec[j];
  for (int m = 2; m < g.ny; ++m)
    for (int j = 0; j < g.nx; ++j)
      b[m * g.nx + j] = dy2 * c.source(g.x(j), g.y(m - 1));
  return b;
}

inline Eigen::VectorXd apply_forward(const ForwardSystem& s,
                                     const Eigen::Ref<const Eigen::VectorXd>& u) {
  return s.apply(u);
}

inline Eigen::VectorXd march_solve(const ForwardSystem& s,
                                   const Eigen::Ref<const Eigen::VectorXd>& rhs) {
  return s.march_solve(rhs);
}

/// Truncation probe: || A u_exact - B_exact ||_inf over the marching blocks
/// (3..ny), normalized by dy^2 so it converges at the scheme's O(dx^2+dy^2)
/// rate under refinement.
inline double truncation_residual(const CauchyCase& c, const Grid2D& g) {
  if (!c.has_exact()) throw std::invalid_argument("truncation_residual: case has no exact field");
  const ForwardSystem sys = ForwardSystem::build(g, c);
  const Eigen::VectorXd ue = sample_exact(c, g);
  const Eigen::VectorXd b =
      assemble_rhs(g, c, sample_boundary(c.dirichlet, g), sample_boundary(c.neumann, g));
  const Eigen::VectorXd r = sys.apply(ue) - b;
  return r.tail(g.size() - 2 * g.nx).lpNorm<Eigen::Infinity>() / (g.dy * g.dy);
}

}  // namespace mollhelm
