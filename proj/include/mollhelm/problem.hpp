#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "mollhelm/grid.hpp"

namespace mollhelm {

using Field2D = std::function<double(double, double)>;
using Field1D = std::function<double(double)>;

/// Data of one Cauchy problem
///   u_xx + u_yy + k^2 eta(x,y) u = S(x,y)   on [a,b] x [0,1]
///   u_y(x,0) = f(x),  u(x,0) = g(x),
/// plus, for analytic benchmark cases, the exact solution and its
/// analytic y-derivative. Fields are plain callables sampled on demand.
struct CauchyCase {
  std::string name;
  RectDomain domain{};
  double k = 0.0;
  Field2D eta;
  Field2D source;
  Field1D neumann;    // f
  Field1D dirichlet;  // g
  Field2D exact;      // empty when no closed form is known
  Field2D exact_dy;   // analytic d/dy of exact, when available

  bool has_exact() const { return static_cast<bool>(exact); }
};

/// Variable refraction index inside an ellipse, oscillatory solution, k = 3.
inline CauchyCase example1() {
  const double k = 3.0;
  const double s2 = std::sqrt(2.0);
  auto theta = [k, s2](double x, double y) { return k / s2 * (x + 2.0 * y - 1.0); };
  auto eta = [](double x, double y) {
    const double q = x * x + (2.0 * y - 1.0) * (2.0 * y - 1.0) / 0.64;
    return q <= 1.0 ? 2.0 - std::sqrt(q) : 1.0;
  };
  auto u = [theta](double x, double y) { return (x - 2.0 * y + 1.0) * std::sin(theta(x, y)); };
  auto u_dy = [k, s2, theta](double x, double y) {
    return -2.0 * std::sin(theta(x, y)) + s2 * k * (x - 2.0 * y + 1.0) * std::cos(theta(x, y));
  };
  // S carries the k^2*eta*u term explicitly, as the problem statement writes it.
  auto source = [k, s2, eta, u, theta](double x, double y) {
    return -2.5 * k * k * (x - 2.0 * y + 1.0) * std::sin(theta(x, y))
           - 3.0 * k * s2 * std::cos(theta(x, y)) + k * k * eta(x, y) * u(x, y);
  };
  auto f = [k, s2](double x) {
    return k * s2 * (x + 1.0) * std::cos(k / s2 * (x - 1.0)) - 2.0 * std::sin(k / s2 * (x - 1.0));
  };
  auto g = [k, s2](double x) { return (x + 1.0) * std::sin(k / s2 * (x - 1.0)); };

  CauchyCase c;
  c.name = "example1";
  c.domain = {-1.0, 1.0};
  c.k = k;
  c.eta = eta;
  c.source = source;
  c.neumann = f;
  c.dirichlet = g;
  c.exact = u;
  c.exact_dy = u_dy;
  return c;
}

/// Gaussian profile linear in y, eta = 1 + y^2, k = 1.
inline CauchyCase example2() {
  const double c0 = 4.0 / std::sqrt(2.0 * M_PI);
  auto u = [c0](double x, double y) { return c0 * (1.0 + y) * std::exp(-8.0 * x * x); };
  auto source = [c0](double x, double y) {
    return c0 * (1.0 + y) * std::exp(-8.0 * x * x) * (256.0 * x * x - 15.0 + y * y);
  };
  auto f = [c0](double x) { return c0 * std::exp(-8.0 * x * x); };

  CauchyCase c;
  c.name = "example2";
  c.domain = {-1.5, 1.5};
  c.k = 1.0;
  c.eta = [](double /*x*/, double y) { return 1.0 + y * y; };
  c.source = source;
  c.neumann = f;
  c.dirichlet = f;  // f == g for this case
  c.exact = u;
  c.exact_dy = [c0](double x, double /*y*/) { return c0 * std::exp(-8.0 * x * x); };
  return c;
}

inline CauchyCase case_by_name(std::string_view name) {
  if (name == "example1") return example1();
  if (name == "example2") return example2();
  throw std::invalid_argument("unknown case '" + std::string(name) +
                              "' (available: example1, example2)");
}

/// Max over n_probe equispaced x of |g(x) - u(x,0)| and |f(x) - u_y(x,0)|.
/// Uses the analytic y-derivative when present, otherwise a centered
/// difference with step 1e-6.
inline double verify_compatibility(const CauchyCase& c, int n_probe) {
  if (!c.has_exact()) throw std::invalid_argument("verify_compatibility: case has no exact field");
  if (n_probe < 2) throw std::invalid_argument("verify_compatibility: need at least 2 probes");
  const double h = 1e-6;
  double worst = 0.0;
  for (int i = 0; i < n_probe; ++i) {
    const double x = c.domain.a + (c.domain.b - c.domain.a) * i / (n_probe - 1);
    const double dg = std::abs(c.dirichlet(x) - c.exact(x, 0.0));
    const double uy = c.exact_dy ? c.exact_dy(x, 0.0)
                                 : (c.exact(x, h) - c.exact(x, -h)) / (2.0 * h);
    const double df = std::abs(c.neumann(x) - uy);
    worst = std::max(worst, std::max(dg, df));
  }
  return worst;
}

// -- grid sampling ----------------------------------------------------------

inline Eigen::VectorXd sample_boundary(const Field1D& f, const Grid2D& g) {
  Eigen::VectorXd v(g.nx);
  for (int j = 0; j < g.nx; ++j) v[j] = f(g.x(j));
  return v;
}

inline Eigen::VectorXd sample_field(const Field2D& f, const Grid2D& g) {
  Eigen::VectorXd v(g.size());
  for (int n = 0; n < g.ny; ++n)
    for (int j = 0; j < g.nx; ++j) v[g.index(j, n)] = f(g.x(j), g.y(n));
  return v;
}

inline Eigen::VectorXd sample_exact(const CauchyCase& c, const Grid2D& g) {
  if (!c.has_exact()) throw std::invalid_argument("sample_exact: case has no exact field");
  return sample_field(c.exact, g);
}

}  // namespace mollhelm
