#pragma once

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "mollhelm/config.hpp"
#include "mollhelm/csv.hpp"
#include "mollhelm/experiment.hpp"

namespace mollhelm {

namespace detail {

inline std::string red_label(double red) { return "red_" + format_double(red); }

inline std::string sweep_csv(const SweepReport& rep) {
  CsvTable t({"alpha", "ratio", "global_error", "selected", "status"});
  for (size_t i = 0; i < rep.entries.size(); ++i) {
    const SweepEntry& e = rep.entries[i];
    t.add_row({format_double(e.alpha), std::isnan(e.ratio) ? "" : format_double(e.ratio),
               std::isnan(e.global_error) ? "" : format_double(e.global_error),
               static_cast<int>(i) == rep.selected_entry ? "1" : "0",
               e.skipped ? "skipped: " + e.skip_reason : "ok"});
  }
  return t.render();
}

inline std::string field_csv(const SweepReport& rep, const Eigen::VectorXd& u) {
  CsvTable t({"x", "y", "u_exact", "u_reconstructed"});
  const Grid2D& g = rep.grid;
  for (int n = 0; n < g.ny; ++n)
    for (int j = 0; j < g.nx; ++j) {
      const int i = g.index(j, n);
      t.add_row({format_double(g.x(j)), format_double(g.y(n)),
                 rep.exact.size() > 0 ? format_double(rep.exact[i]) : "", format_double(u[i])});
    }
  return t.render();
}

inline std::string solver_csv(const SweepReport& rep) {
  CsvTable t({"alpha", "iterations", "rel_residual"});
  for (const SweepEntry& e : rep.entries)
    if (!e.skipped)
      t.add_row({format_double(e.alpha), std::to_string(e.iterations),
                 format_double(e.rel_residual)});
  return t.render();
}

}  // namespace detail

/// Full experiment over every configured noise level. Writes, under out_dir:
///   config.json                   effective configuration echo
///   summary.csv                   one row per level: selection and slice errors
///   slices.csv                    slice errors, one column per level
///   <level>/sweep.csv, field.csv  per-level sweep data and selected field
/// All content is rendered first and written through temp files, so an IO
/// failure does not leave partial CSVs under their final names.
inline int cmd_run(const RunConfig& cfg, const std::filesystem::path& out_dir, int threads = 1,
                   bool verbose = false) {
  const CauchyCase c = case_by_name(cfg.case_name);
  const Grid2D grid = build_grid(c.domain, cfg.nx, cfg.ny);
  SolveOptions opt;
  opt.tol = cfg.solver_tol;
  opt.max_iter = cfg.solver_max_iter > 0 ? cfg.solver_max_iter : -1;
  opt.threads = threads;
  opt.verbose = verbose;

  struct LevelRun {
    std::string label;
    SweepReport report;
  };
  std::vector<LevelRun> runs;
  if (cfg.noise_levels.empty()) {
    runs.push_back({"noise_free", run_sweep(c, grid, nullptr, cfg.alpha, opt)});
  } else {
    for (double red : cfg.noise_levels) {
      NoiseSpec spec{red, cfg.seed};
      runs.push_back({detail::red_label(red), run_sweep(c, grid, &spec, cfg.alpha, opt)});
      if (verbose)
        std::cerr << "level " << red << ": alpha* = " << runs.back().report.alpha_star
                  << ", global error = " << runs.back().report.global_error_selected << "\n";
    }
  }

  // render everything before touching the filesystem
  CsvTable summary({"red", "alpha_star", "global_error", "march_error", "err_y0", "err_y0.25",
                    "err_y0.5", "err_y0.75", "err_y1"});
  for (const LevelRun& r : runs) {
    std::vector<std::string> row{r.report.red ? format_double(*r.report.red) : "0",
                                 format_double(r.report.alpha_star),
                                 std::isnan(r.report.global_error_selected)
                                     ? ""
                                     : format_double(r.report.global_error_selected),
                                 std::isnan(r.report.march_global_error)
                                     ? ""
                                     : format_double(r.report.march_global_error)};
    for (double y : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      std::string cell;
      for (const auto& [sy, err] : r.report.slice_errors)
        if (sy == y) cell = format_double(err);
      row.push_back(cell);
    }
    summary.add_row(row);
  }

  std::vector<std::string> slice_header{"y"};
  for (const LevelRun& r : runs) slice_header.push_back(r.label);
  CsvTable slices(slice_header);
  for (size_t k = 0; k < 5; ++k) {
    const double y = std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}[k];
    std::vector<std::string> row{format_double(y)};
    for (const LevelRun& r : runs) {
      std::string cell;
      for (const auto& [sy, err] : r.report.slice_errors)
        if (sy == y) cell = format_double(err);
      row.push_back(cell);
    }
    slices.add_row(row);
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  atomic_write_file(out_dir / "config.json", render_config(cfg));
  atomic_write_file(out_dir / "summary.csv", summary.render());
  atomic_write_file(out_dir / "slices.csv", slices.render());
  for (const LevelRun& r : runs) {
    const std::filesystem::path dir = out_dir / r.label;
    std::filesystem::create_directories(dir, ec);
    atomic_write_file(dir / "sweep.csv", detail::sweep_csv(r.report));
    atomic_write_file(dir / "field.csv",
                      detail::field_csv(r.report, r.report.entries[r.report.selected_entry].solution));
    if (verbose) atomic_write_file(dir / "solver.csv", detail::solver_csv(r.report));
  }
  return 0;
}

/// Kernel-symbol diagnostics: m_alpha, M_alpha and the ratio of 1 - phihat to
/// its small-frequency asymptote 2 pi^2 alpha^2 |xi|^2, evaluated at |xi| = 1.
inline int cmd_kernel(const std::vector<double>& alphas, const std::filesystem::path& out_dir) {
  if (alphas.empty()) throw std::invalid_argument("kernel: need at least one alpha");
  CsvTable t({"alpha", "m_alpha", "M_alpha", "asymptote_ratio"});
  for (double a : alphas) {
    const GaussianKernel k{a};
    const LemmaBounds b = lemma_bounds(k);
    const double scale = 2.0 * M_PI * M_PI * a * a;
    t.add_row({format_double(a), format_double(b.m_alpha), format_double(b.M_alpha),
               format_double((1.0 - symbol(k, 1.0, 0.0)) / scale)});
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  atomic_write_file(out_dir / "kernel.csv", t.render());
  return 0;
}

/// Reports the dy^2-normalized truncation residual on two grids and the
/// refinement ratio (about 4 when the fine grid halves both steps).
inline int cmd_consistency(const std::string& case_name, int coarse_nx, int coarse_ny, int fine_nx,
                           int fine_ny, std::ostream& out) {
  const CauchyCase c = case_by_name(case_name);
  if (!c.has_exact()) throw std::invalid_argument("consistency: case has no exact solution");
  const double rc = truncation_residual(c, build_grid(c.domain, coarse_nx, coarse_ny));
  const double rf = truncation_residual(c, build_grid(c.domain, fine_nx, fine_ny));
  out << "coarse (" << coarse_nx << "x" << coarse_ny << "): " << format_double(rc) << "\n";
  out << "fine   (" << fine_nx << "x" << fine_ny << "): " << format_double(rf) << "\n";
  out << "ratio: " << format_double(rc / rf) << "\n";
  if (coarse_nx == fine_nx && coarse_ny == fine_ny)
    out << "warning: the two grids are identical; the ratio carries no information\n";
  return 0;
}

}  // namespace mollhelm
