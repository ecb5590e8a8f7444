#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "mollhelm/grid.hpp"

namespace mollhelm {

/// Isotropic Gaussian mollifier phi_a(x,y) = exp(-(x^2+y^2)/(2a^2)) / (2 pi a^2).
struct GaussianKernel {
  double alpha = 0.1;
};

inline void validate_kernel(const GaussianKernel& k) {
  if (!(k.alpha > 0.0) || k.alpha > 1.0)
    throw std::invalid_argument("kernel: alpha must lie in (0, 1]");
}

/// Fourier transform of phi_a under the e^{-2 pi i <x,xi>} convention:
/// phihat(xi) = exp(-2 pi^2 a^2 |xi|^2). Real, radial, in (0, 1].
inline double symbol(const GaussianKernel& k, double xi_x, double xi_y) {
  validate_kernel(k);
  const double r2 = xi_x * xi_x + xi_y * xi_y;
  return std::exp(-2.0 * M_PI * M_PI * k.alpha * k.alpha * r2);
}

struct LemmaBounds {
  double m_alpha;
  double M_alpha;
};

/// min/max over unit directions of |1 - phihat(alpha xi)|^2, sampled on 256
/// directions and cross-checked against the radial closed form
/// (1 - exp(-2 pi^2 a^2))^2, which both bounds equal for an isotropic kernel.
inline LemmaBounds lemma_bounds(const GaussianKernel& k) {
  validate_kernel(k);
  constexpr int kDirections = 256;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int i = 0; i < kDirections; ++i) {
    const double t = 2.0 * M_PI * i / kDirections;
    const double v = 1.0 - symbol(k, std::cos(t), std::sin(t));
    lo = std::min(lo, v * v);
    hi = std::max(hi, v * v);
  }
  const double e = 1.0 - std::exp(-2.0 * M_PI * M_PI * k.alpha * k.alpha);
  const double closed = e * e;
  if (std::abs(lo - closed) > 1e-12 * std::max(1.0, closed) ||
      std::abs(hi - closed) > 1e-12 * std::max(1.0, closed))
    throw std::logic_error("lemma_bounds: sampled circle disagrees with closed form");
  return {lo, hi};
}

/// Base grid plus p ghost layers on every side. The outermost taper_width
/// layers carry the cutoff decay; coordinates continue the uniform spacing.
struct ExtendedGrid {
  Grid2D base{};
  int p = 4;
  int taper_width = 2;

  int ext_nx() const { return base.nx + 2 * p; }
  int ext_ny() const { return base.ny + 2 * p; }
  int ext_size() const { return ext_nx() * ext_ny(); }
  double x(int i) const { return base.domain.a + (i - p) * base.dx; }
  double y(int i) const { return (i - p) * base.dy; }
};

inline ExtendedGrid make_extended_grid(const Grid2D& base, int p, int taper_width = 2) {
  if (taper_width < 1 || p < 2 * taper_width)
    throw std::invalid_argument("extended grid: requires p >= 2*taper_width >= 2");
  return ExtendedGrid{base, p, taper_width};
}

/// Ghost band wide enough to hold the truncated kernel of width alpha,
/// but at least 4 layers.
inline int default_ghost_layers(const Grid2D& g, double alpha) {
  const double h = std::min(g.dx, g.dy);
  return std::max(4, static_cast<int>(std::ceil(4.0 * alpha / h)));
}

/// Operator with separable factors: a field X (nx_in x ny_in, x-fastest
/// storage) maps to fx * X * fy^T. kron(fy, fx) is the flat-vector matrix.
struct SeparableOp {
  Eigen::MatrixXd fx;
  Eigen::MatrixXd fy;

  Eigen::MatrixXd apply(const Eigen::Ref<const Eigen::MatrixXd>& field) const {
    return fx * field * fy.transpose();
  }
  Eigen::MatrixXd apply_transpose(const Eigen::Ref<const Eigen::MatrixXd>& field) const {
    return fx.transpose() * field * fy;
  }

  Eigen::VectorXd apply_vec(const Eigen::Ref<const Eigen::VectorXd>& u) const {
    Eigen::Map<const Eigen::MatrixXd> field(u.data(), fx.cols(), fy.cols());
    Eigen::MatrixXd out = apply(field);
    return Eigen::Map<Eigen::VectorXd>(out.data(), out.size());
  }

  /// Full flat-vector matrix; intended for tests and small diagnostics only.
  Eigen::MatrixXd kron() const {
    Eigen::MatrixXd k(fx.rows() * fy.rows(), fx.cols() * fy.cols());
    for (Eigen::Index jy = 0; jy < fy.cols(); ++jy)
      for (Eigen::Index iy = 0; iy < fy.rows(); ++iy)
        k.block(iy * fx.rows(), jy * fx.cols(), fx.rows(), fx.cols()) = fy(iy, jy) * fx;
    return k;
  }
};

namespace detail {

inline double smoothstep(double s) { return s * s * (3.0 - 2.0 * s); }

/// 1D reflection extension: ghost node at depth l receives
/// 3 u(depth l) - 2 u(depth 2l), then the cutoff factor. chi is 1 up to
/// depth p - tw and decays smoothly to 0 at depth p.
inline Eigen::MatrixXd extension_1d(int n, int p, int tw) {
  if (2 * p >= n)
    throw std::invalid_argument("extension: grid too small for requested ghost depth (2p < n)");
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n + 2 * p, n);
  for (int i = 0; i < n; ++i) e(p + i, i) = 1.0;
  for (int l = 1; l <= p; ++l) {
    const double chi = l <= p - tw ? 1.0 : smoothstep(static_cast<double>(p - l) / tw);
    e(p - l, l) += 3.0 * chi;
    e(p - l, 2 * l) += -2.0 * chi;
    e(p + n - 1 + l, n - 1 - l) += 3.0 * chi;
    e(p + n - 1 + l, n - 1 - 2 * l) += -2.0 * chi;
  }
  return e;
}

/// 1D convolution with the sampled Gaussian, truncated per axis at 4*alpha
/// and renormalized row-wise to unit mass over the available window.
inline Eigen::MatrixXd convolution_1d(int m, double h, double alpha) {
  const int hw = static_cast<int>(std::floor(4.0 * alpha / h));
  Eigen::VectorXd w(2 * hw + 1);
  for (int k = -hw; k <= hw; ++k) w[k + hw] = std::exp(-(k * h) * (k * h) / (2.0 * alpha * alpha));
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    const int lo = std::max(0, i - hw), hi = std::min(m - 1, i + hw);
    double mass = 0.0;
    for (int j = lo; j <= hi; ++j) mass += w[j - i + hw];
    for (int j = lo; j <= hi; ++j) c(i, j) = w[j - i + hw] / mass;
  }
  return c;
}

/// Centered second-order first derivative, one-sided second order at edges.
inline Eigen::MatrixXd diff1_1d(int m, double h) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
  for (int i = 1; i < m - 1; ++i) {
    d(i, i - 1) = -0.5 / h;
    d(i, i + 1) = 0.5 / h;
  }
  d(0, 0) = -1.5 / h;
  d(0, 1) = 2.0 / h;
  d(0, 2) = -0.5 / h;
  d(m - 1, m - 1) = 1.5 / h;
  d(m - 1, m - 2) = -2.0 / h;
  d(m - 1, m - 3) = 0.5 / h;
  return d;
}

/// Second derivative; the edge rows reuse the 4-node one-sided stencil.
inline Eigen::MatrixXd diff2_1d(int m, double h) {
  const double h2 = h * h;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
  for (int i = 1; i < m - 1; ++i) {
    d(i, i - 1) = 1.0 / h2;
    d(i, i) = -2.0 / h2;
    d(i, i + 1) = 1.0 / h2;
  }
  d(0, 0) = 2.0 / h2;
  d(0, 1) = -5.0 / h2;
  d(0, 2) = 4.0 / h2;
  d(0, 3) = -1.0 / h2;
  d(m - 1, m - 1) = 2.0 / h2;
  d(m - 1, m - 2) = -5.0 / h2;
  d(m - 1, m - 3) = 4.0 / h2;
  d(m - 1, m - 4) = -1.0 / h2;
  return d;
}

}  // namespace detail

/// E: base field -> extended field. Restriction to base nodes is the exact
/// identity; ghost values use the value/slope-matching reflection with the
/// smoothstep cutoff, applied as the x-rule then the y-rule (the cutoff is
/// the product of the two 1D profiles, so the factors commute).
inline SeparableOp build_extension(const ExtendedGrid& eg) {
  return SeparableOp{detail::extension_1d(eg.base.nx, eg.p, eg.taper_width),
                     detail::extension_1d(eg.base.ny, eg.p, eg.taper_width)};
}

/// C: extended field -> extended field, separable product of the 1D
/// renormalized truncated-Gaussian convolutions.
inline SeparableOp build_convolution(const GaussianKernel& k, const ExtendedGrid& eg) {
  validate_kernel(k);
  const int need_x = static_cast<int>(std::ceil(4.0 * k.alpha / eg.base.dx));
  const int need_y = static_cast<int>(std::ceil(4.0 * k.alpha / eg.base.dy));
  if (need_x > eg.p || need_y > eg.p)
    throw std::invalid_argument("convolution: kernel truncation radius exceeds the ghost band");
  return SeparableOp{detail::convolution_1d(eg.ext_nx(), eg.base.dx, k.alpha),
                     detail::convolution_1d(eg.ext_ny(), eg.base.dy, k.alpha)};
}

struct DerivativeOps {
  SeparableOp dx, dy, dxx, dyy, dxy;
};

/// Difference operators on the extended grid. Dxy composes the two first
/// derivatives, which is exact in the separable representation.
inline DerivativeOps build_derivatives(const ExtendedGrid& eg) {
  const Eigen::MatrixXd ix = Eigen::MatrixXd::Identity(eg.ext_nx(), eg.ext_nx());
  const Eigen::MatrixXd iy = Eigen::MatrixXd::Identity(eg.ext_ny(), eg.ext_ny());
  const Eigen::MatrixXd d1x = detail::diff1_1d(eg.ext_nx(), eg.base.dx);
  const Eigen::MatrixXd d1y = detail::diff1_1d(eg.ext_ny(), eg.base.dy);
  const Eigen::MatrixXd d2x = detail::diff2_1d(eg.ext_nx(), eg.base.dx);
  const Eigen::MatrixXd d2y = detail::diff2_1d(eg.ext_ny(), eg.base.dy);
  return DerivativeOps{{d1x, iy}, {ix, d1y}, {d2x, iy}, {ix, d2y}, {d1x, d1y}};
}

/// Assembled regularizer for one kernel width.
///
/// The quadratic form is E^T (I-C)^T D (I-C) E with the derivative weight
/// D = I + Dx^T Dx + Dy^T Dy + Dxx^T Dxx + Dyy^T Dyy + 2 Dxy^T Dxy summed
/// over the domain nodes (the extended field is restricted to the base grid
/// before D is applied). With R the restriction, R E = I exactly, so the
/// penalty reduces to (I - K)^T D_base (I - K) with K = R C E the base-size
/// convolution with reflection boundary handling.
class RegularizerStack {
 public:
  RegularizerStack(const GaussianKernel& kernel, const ExtendedGrid& eg)
      : kernel_(kernel),
        egrid_(eg),
        ext_(build_extension(eg)),
        conv_(build_convolution(kernel, eg)),
        derivs_(build_derivatives(eg)) {
    const int nx = eg.base.nx, ny = eg.base.ny, p = eg.p;
    kx_ = (conv_.fx * ext_.fx).middleRows(p, nx);
    ky_ = (conv_.fy * ext_.fy).middleRows(p, ny);
    // I - ky (x) kx applied without cancellation between the two Kronecker
    // terms: I - ky(x)kx = qy (x) kx + I (x) qx with q = I - k. When the
    // kernel degenerates to the identity both q factors are exactly zero.
    qx_ = Eigen::MatrixXd::Identity(nx, nx) - kx_;
    qy_ = Eigen::MatrixXd::Identity(ny, ny) - ky_;
    dxb_ = detail::diff1_1d(nx, eg.base.dx);
    dyb_ = detail::diff1_1d(ny, eg.base.dy);
    dxxb_ = detail::diff2_1d(nx, eg.base.dx);
    dyyb_ = detail::diff2_1d(ny, eg.base.dy);
    sx1_ = dxb_.transpose() * dxb_;
    sy1_ = dyb_.transpose() * dyb_;
    sx2_ = dxxb_.transpose() * dxxb_;
    sy2_ = dyyb_.transpose() * dyyb_;
  }

  const GaussianKernel& kernel() const { return kernel_; }
  const ExtendedGrid& egrid() const { return egrid_; }
  const SeparableOp& extension() const { return ext_; }
  const SeparableOp& convolution() const { return conv_; }
  const DerivativeOps& derivatives() const { return derivs_; }
  int size() const { return egrid_.base.size(); }

  /// penalty * u, matrix-free.
  Eigen::VectorXd apply_penalty(const Eigen::Ref<const Eigen::VectorXd>& u) const {
    const int nx = egrid_.base.nx, ny = egrid_.base.ny;
    if (u.size() != nx * ny) throw std::invalid_argument("apply_penalty: size mismatch");
    Eigen::Map<const Eigen::MatrixXd> x(u.data(), nx, ny);
    const Eigen::MatrixXd y = kx_ * x * qy_.transpose() + qx_ * x;
    Eigen::MatrixXd w = y + sx1_ * y + y * sy1_ + sx2_ * y + y * sy2_;
    w.noalias() += 2.0 * (sx1_ * y * sy1_);
    Eigen::MatrixXd z = kx_.transpose() * w * qy_ + qx_.transpose() * w;
    return Eigen::Map<Eigen::VectorXd>(z.data(), z.size());
  }

  /// u^T penalty u evaluated as the sum of squared seminorms, which is also
  /// the penalty part of the data-fit objective.
  double penalty_quadratic(const Eigen::Ref<const Eigen::VectorXd>& u) const {
    const int nx = egrid_.base.nx, ny = egrid_.base.ny;
    Eigen::Map<const Eigen::MatrixXd> x(u.data(), nx, ny);
    const Eigen::MatrixXd y = kx_ * x * qy_.transpose() + qx_ * x;
    double v = y.squaredNorm();
    v += (dxb_ * y).squaredNorm();
    v += (y * dyb_.transpose()).squaredNorm();
    v += (dxxb_ * y).squaredNorm();
    v += (y * dyyb_.transpose()).squaredNorm();
    v += 2.0 * (dxb_ * y * dyb_.transpose()).squaredNorm();
    return v;
  }

  /// Dense penalty matrix, assembled from the separable factors as a sum of
  /// Kronecker terms built on the cancellation-free q factors, then
  /// symmetrized (the terms round asymmetrically at machine precision).
  Eigen::MatrixXd materialize_penalty() const {
    const int nx = egrid_.base.nx, ny = egrid_.base.ny;
    const Eigen::MatrixXd ix = Eigen::MatrixXd::Identity(nx, nx);
    const Eigen::MatrixXd iy = Eigen::MatrixXd::Identity(ny, ny);
    const Eigen::MatrixXd* bx[2] = {&kx_, &qx_};
    const Eigen::MatrixXd* by[2] = {&qy_, &iy};
    struct Term {
      const Eigen::MatrixXd* ay;
      const Eigen::MatrixXd* ax;
      double w;
    };
    const Term terms[6] = {{&iy, &ix, 1.0},  {&iy, &sx1_, 1.0}, {&sy1_, &ix, 1.0},
                           {&iy, &sx2_, 1.0}, {&sy2_, &ix, 1.0}, {&sy1_, &sx1_, 2.0}};
    Eigen::MatrixXd pen = Eigen::MatrixXd::Zero(nx * ny, nx * ny);
    for (int t = 0; t < 2; ++t)
      for (int u = 0; u < 2; ++u)
        for (const Term& term : terms) {
          const Eigen::MatrixXd sy = by[t]->transpose() * (*term.ay) * (*by[u]);
          const Eigen::MatrixXd sx = bx[t]->transpose() * (*term.ax) * (*bx[u]);
          if (sy.cwiseAbs().maxCoeff() == 0.0 || sx.cwiseAbs().maxCoeff() == 0.0) continue;
          for (int jy = 0; jy < ny; ++jy)
            for (int iy2 = 0; iy2 < ny; ++iy2)
              pen.block(iy2 * nx, jy * nx, nx, nx) += (term.w * sy(iy2, jy)) * sx;
        }
    pen = 0.5 * (pen + pen.transpose()).eval();
    return pen;
  }

 private:
  GaussianKernel kernel_;
  ExtendedGrid egrid_;
  SeparableOp ext_;
  SeparableOp conv_;
  DerivativeOps derivs_;
  Eigen::MatrixXd kx_, ky_;                  // R C E factors, base x base
  Eigen::MatrixXd qx_, qy_;                  // I - k factors
  Eigen::MatrixXd dxb_, dyb_, dxxb_, dyyb_;  // base-grid difference factors
  Eigen::MatrixXd sx1_, sy1_, sx2_, sy2_;    // D^T D factors
};

inline RegularizerStack build_penalty(const GaussianKernel& k, const ExtendedGrid& eg) {
  return RegularizerStack(k, eg);
}

}  // namespace mollhelm
