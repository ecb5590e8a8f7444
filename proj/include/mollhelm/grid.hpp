#pragma once

#include <stdexcept>

namespace mollhelm {

/// Rectangle [a,b] x [0,1]; the y-range is fixed by the problem class.
struct RectDomain {
  double a;
  double b;
};

/// Uniform tensor grid on a RectDomain.
///
/// Nodes are x_j = a + j*dx (j = 0..nx-1) and y_n = n*dy (n = 0..ny-1).
/// Fields are stored x-fastest: flat index = n*nx + j, matching the
/// level-stacked layout (U^1; U^2; ...; U^ny) of the forward system.
struct Grid2D {
  RectDomain domain{};
  int nx = 0;
  int ny = 0;
  double dx = 0.0;
  double dy = 0.0;
  double gamma = 0.0;  // dy^2/dx^2

  double x(int j) const { return domain.a + j * dx; }
  double y(int n) const { return n * dy; }
  int size() const { return nx * ny; }
  int index(int j, int n) const { return n * nx + j; }
};

/// nx >= 5 because the one-sided boundary stencil spans four nodes;
/// ny >= 3 so the marching recurrence has at least one interior level.
inline Grid2D build_grid(RectDomain domain, int nx, int ny) {
  if (!(domain.a < domain.b)) throw std::invalid_argument("grid: requires a < b");
  if (nx < 5) throw std::invalid_argument("grid: nx must be >= 5");
  if (ny < 3) throw std::invalid_argument("grid: ny must be >= 3");
  Grid2D g;
  g.domain = domain;
  g.nx = nx;
  g.ny = ny;
  g.dx = (domain.b - domain.a) / (nx - 1);
  g.dy = 1.0 / (ny - 1);
  g.gamma = (g.dy * g.dy) / (g.dx * g.dx);
  return g;
}

}  // namespace mollhelm
