#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "mollhelm/assembly.hpp"
#include "mollhelm/mollifier.hpp"
#include "mollhelm/problem.hpp"
#include "mollhelm/solver.hpp"

namespace mollhelm {

/// Target relative data error (Red) and the generator seed. Identical spec
/// and grid reproduce the noise vectors bit for bit.
struct NoiseSpec {
  double target_red = 1e-2;
  std::uint64_t seed = 0;
};

struct NoisyData {
  Eigen::VectorXd g;
  Eigen::VectorXd f;
  double eps_g = 0.0;
  double eps_f = 0.0;
};

namespace detail {

/// Box-Muller on top of mt19937_64. std::normal_distribution is
/// implementation-defined, which would break cross-platform determinism.
inline Eigen::VectorXd standard_normal(std::mt19937_64& rng, int n) {
  Eigen::VectorXd v(n);
  int i = 0;
  while (i < n) {
    const double u1 = (static_cast<double>(rng()) + 1.0) / (static_cast<double>(rng.max()) + 2.0);
    const double u2 = static_cast<double>(rng()) / (static_cast<double>(rng.max()) + 1.0);
    const double r = std::sqrt(-2.0 * std::log(u1));
    v[i++] = r * std::cos(2.0 * M_PI * u2);
    if (i < n) v[i++] = r * std::sin(2.0 * M_PI * u2);
  }
  return v;
}

}  // namespace detail

/// Perturbs G and F with independent Gaussian vectors, calibrated so the
/// achieved relative data error equals target_red exactly:
/// eps = target_red * ||data|| / ||theta||.
inline NoisyData add_noise(const Eigen::Ref<const Eigen::VectorXd>& g,
                           const Eigen::Ref<const Eigen::VectorXd>& f, const NoiseSpec& spec) {
  if (!(spec.target_red > 0.0))
    throw std::invalid_argument("add_noise: target_red must be positive (omit noise instead)");
  if (g.norm() == 0.0 || f.norm() == 0.0)
    throw std::invalid_argument("add_noise: zero-norm data cannot be calibrated");
  std::mt19937_64 rng(spec.seed);
  const Eigen::VectorXd theta_g = detail::standard_normal(rng, static_cast<int>(g.size()));
  const Eigen::VectorXd theta_f = detail::standard_normal(rng, static_cast<int>(f.size()));
  NoisyData out;
  out.eps_g = spec.target_red * g.norm() / theta_g.norm();
  out.eps_f = spec.target_red * f.norm() / theta_f.norm();
  out.g = g + out.eps_g * theta_g;
  out.f = f + out.eps_f * theta_f;
  return out;
}

/// Geometric parameter grid alpha_n = alpha0 * q^n, n = 1..n0.
struct AlphaGrid {
  double alpha0 = 0.5;
  double q = 0.7;
  int n0 = 15;

  std::vector<double> values() const {
    if (!(alpha0 > 0.0)) throw std::invalid_argument("alpha grid: alpha0 must be positive");
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("alpha grid: q must lie in (0,1)");
    if (n0 < 2) throw std::invalid_argument("alpha grid: n0 must be at least 2");
    std::vector<double> v(n0);
    double a = alpha0;
    for (int n = 0; n < n0; ++n) {
      a *= q;
      v[n] = a;
    }
    return v;
  }
};

struct Selection {
  int n_star = 0;        // 0-based index into the solution list
  double alpha_star = 0.0;
  std::vector<double> ratios;  // ||U_n - U_{n+1}|| / (alpha_n - alpha_{n+1})
};

/// Quasi-optimality-type choice: minimize the scaled difference of
/// consecutive solutions. Ties break toward the larger alpha.
inline Selection select_alpha(const std::vector<double>& alphas,
                              const std::vector<Eigen::VectorXd>& solutions) {
  if (alphas.size() != solutions.size())
    throw std::invalid_argument("select_alpha: alphas/solutions size mismatch");
  if (solutions.size() < 2)
    throw std::invalid_argument("select_alpha: need at least two solutions");
  for (size_t i = 0; i + 1 < alphas.size(); ++i)
    if (!(alphas[i] > alphas[i + 1]))
      throw std::invalid_argument("select_alpha: alphas must be strictly decreasing");

  Selection s;
  s.ratios.resize(solutions.size() - 1);
  for (size_t i = 0; i + 1 < solutions.size(); ++i)
    s.ratios[i] = (solutions[i] - solutions[i + 1]).norm() / (alphas[i] - alphas[i + 1]);
  s.n_star = 0;
  for (size_t i = 1; i < s.ratios.size(); ++i)
    if (s.ratios[i] < s.ratios[s.n_star]) s.n_star = static_cast<int>(i);
  s.alpha_star = alphas[s.n_star];
  return s;
}

/// Relative Euclidean error of one y-slice against the exact solution.
/// y must coincide with a grid level to within dy/2.
inline double slice_error(const Eigen::Ref<const Eigen::VectorXd>& u, const CauchyCase& c,
                          const Grid2D& g, double y) {
  if (!c.has_exact()) throw std::invalid_argument("slice_error: case has no exact field");
  if (u.size() != g.size()) throw std::invalid_argument("slice_error: field size mismatch");
  const int n = static_cast<int>(std::lround(y / g.dy));
  if (n < 0 || n >= g.ny || std::abs(g.y(n) - y) > g.dy / 2.0)
    throw std::invalid_argument("slice_error: y does not coincide with a grid level");
  Eigen::VectorXd exact_row(g.nx);
  for (int j = 0; j < g.nx; ++j) exact_row[j] = c.exact(g.x(j), g.y(n));
  const double denom = exact_row.norm();
  if (denom == 0.0) throw std::invalid_argument("slice_error: exact slice has zero norm");
  return (u.segment(n * g.nx, g.nx) - exact_row).norm() / denom;
}

struct SolveOptions {
  double tol = 1e-10;
  int max_iter = -1;  // < 0: 5 * system size
  int threads = 1;
  bool verbose = false;
};

struct SweepEntry {
  int n = 0;           // 1-based index into the alpha grid
  double alpha = 0.0;
  bool skipped = false;
  std::string skip_reason;
  Eigen::VectorXd solution;
  double ratio = std::numeric_limits<double>::quiet_NaN();  // to the next computed entry
  double global_error = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double rel_residual = std::numeric_limits<double>::quiet_NaN();
};

struct SweepReport {
  Grid2D grid;
  std::optional<double> red;   // achieved relative data error
  std::uint64_t seed = 0;
  std::vector<SweepEntry> entries;        // one per alpha grid point, in order
  int selected_entry = -1;                // index into entries
  double alpha_star = 0.0;
  std::vector<std::pair<double, double>> slice_errors;  // (y, error) for the selected solution
  double global_error_selected = std::numeric_limits<double>::quiet_NaN();
  double march_global_error = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd march_solution;
  Eigen::VectorXd exact;       // empty when the case has no closed form
};

/// True when a penalty stack can be built for this alpha on this grid:
/// the ghost band must fit the reflections and the truncated kernel must
/// span at least one neighbor in some direction (otherwise C is the
/// identity and the normal system degenerates to the unsolvable A^T A).
inline bool alpha_feasible(const Grid2D& g, double alpha, std::string* reason = nullptr) {
  const int p = default_ghost_layers(g, alpha);
  if (2 * p >= std::min(g.nx, g.ny)) {
    if (reason) *reason = "ghost band exceeds reflectable depth";
    return false;
  }
  if (4.0 * alpha < std::min(g.dx, g.dy)) {
    if (reason) *reason = "kernel below grid resolution";
    return false;
  }
  return true;
}

/// One full experiment: assemble the forward system, perturb the data when a
/// noise spec is given, solve the regularized normal equations for every
/// feasible alpha, apply the selection rule, and evaluate the error metrics.
inline SweepReport run_sweep(const CauchyCase& c, const Grid2D& g, const NoiseSpec* noise,
                             const AlphaGrid& agrid, const SolveOptions& opt = {}) {
  const ForwardSystem sys = ForwardSystem::build(g, c);
  Eigen::VectorXd gd = sample_boundary(c.dirichlet, g);
  Eigen::VectorXd fd = sample_boundary(c.neumann, g);

  SweepReport rep;
  rep.grid = g;
  if (noise != nullptr) {
    const NoisyData nd = add_noise(gd, fd, *noise);
    rep.red = (nd.g - gd).norm() / gd.norm();
    rep.seed = noise->seed;
    gd = nd.g;
    fd = nd.f;
  }
  const Eigen::VectorXd b = assemble_rhs(g, c, gd, fd);

  const std::vector<double> alphas = agrid.values();
  rep.entries.resize(alphas.size());
  for (size_t i = 0; i < alphas.size(); ++i) {
    rep.entries[i].n = static_cast<int>(i) + 1;
    rep.entries[i].alpha = alphas[i];
    rep.entries[i].skipped = !alpha_feasible(g, alphas[i], &rep.entries[i].skip_reason);
  }

  if (c.has_exact()) rep.exact = sample_exact(c, g);

  auto solve_one = [&](SweepEntry& e) {
    const ExtendedGrid eg = make_extended_grid(g, default_ghost_layers(g, e.alpha));
    const RegularizerStack stack(GaussianKernel{e.alpha}, eg);
    const NormalSystem n = assemble_normal(sys, stack, b);
    const IterativeResult r = solve_spd(n, opt.tol, opt.max_iter);
    e.solution = r.solution;
    e.iterations = r.iterations;
    e.rel_residual = r.rel_residual;
    if (rep.exact.size() > 0)
      e.global_error = (e.solution - rep.exact).norm() / rep.exact.norm();
  };

  std::vector<int> todo;
  for (size_t i = 0; i < rep.entries.size(); ++i)
    if (!rep.entries[i].skipped) todo.push_back(static_cast<int>(i));
  if (todo.size() < 2)
    throw std::runtime_error("run_sweep: fewer than two feasible alpha values on this grid");

  const int workers = std::max(1, std::min<int>(opt.threads, static_cast<int>(todo.size())));
  if (workers == 1) {
    for (int i : todo) solve_one(rep.entries[i]);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < todo.size(); i = next.fetch_add(1))
          solve_one(rep.entries[todo[i]]);
      });
    for (auto& t : pool) t.join();
  }

  std::vector<double> used_alphas;
  std::vector<Eigen::VectorXd> used_solutions;
  for (int i : todo) {
    used_alphas.push_back(rep.entries[i].alpha);
    used_solutions.push_back(rep.entries[i].solution);
  }
  const Selection sel = select_alpha(used_alphas, used_solutions);
  for (size_t k = 0; k + 1 < todo.size(); ++k) rep.entries[todo[k]].ratio = sel.ratios[k];
  rep.selected_entry = todo[sel.n_star];
  rep.alpha_star = sel.alpha_star;

  rep.march_solution = sys.march_solve(b);
  if (rep.exact.size() > 0) {
    const Eigen::VectorXd& u_star = rep.entries[rep.selected_entry].solution;
    rep.global_error_selected = (u_star - rep.exact).norm() / rep.exact.norm();
    rep.march_global_error = (rep.march_solution - rep.exact).norm() / rep.exact.norm();
    for (double y : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const int n = static_cast<int>(std::lround(y / g.dy));
      if (n >= 0 && n < g.ny && std::abs(g.y(n) - y) <= g.dy / 2.0)
        rep.slice_errors.emplace_back(y, slice_error(u_star, c, g, y));
    }
  }
  return rep;
}

}  // namespace mollhelm
