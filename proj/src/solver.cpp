#include "bsvie/solver.hpp"

#include "bsvie/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bsvie {

namespace {

void require_finite(const Eigen::ArrayXd& v, const char* what, Index i, Index j) {
  if (v.allFinite()) return;
  Index p = 0;
  while (p < v.size() && std::isfinite(v[p])) ++p;
  throw EvaluationError(std::string(what) + " is not finite at cell (" + std::to_string(i) + "," +
                            std::to_string(j) + "), path " + std::to_string(p),
                        i, j);
}

void validate(const ProblemSpec& problem, const Driver& driver, const SolverConfig& config) {
  if (!(problem.grid == driver.grid())) {
    throw ShapeError("solver: problem grid and ensemble grid differ");
  }
  if (driver.observed && (driver.observed->rows() != driver.paths.paths() ||
                          driver.observed->cols() != driver.grid().steps() + 1)) {
    throw ShapeError("solver: observed paths must be M x (N+1)");
  }
  if (!(config.tol > 0.0)) throw ValidationError("solver: tol must be > 0");
  if (config.max_iter < 1) throw ValidationError("solver: max_iter must be >= 1");
  if (config.stitch_node &&
      (*config.stitch_node < 0 || *config.stitch_node > problem.grid.steps())) {
    throw ValidationError("solver: stitch node outside the grid");
  }
}

// The generator at one cell for all paths.
Eigen::ArrayXd generator_at(const ProblemSpec& problem, const Eigen::MatrixXd& w, Index i, Index j,
                            const Eigen::ArrayXd& y, const Eigen::ArrayXd& z,
                            const Eigen::ArrayXd& zeta) {
  const TimeGrid& g = problem.grid;
  const Eigen::ArrayXd ws = w.col(j).array();
  const Eigen::ArrayXd wt = w.col(i).array();
  Eigen::ArrayXd out =
      problem.generator(GeneratorArgs{g[i], g[j], y, z, zeta, ws, wt, g.start(), g.horizon()});
  require_finite(out, "generator", i, j);
  return out;
}

Eigen::ArrayXd terminal_at(const ProblemSpec& problem, const Eigen::MatrixXd& w, Index i) {
  const TimeGrid& g = problem.grid;
  const Index n = g.steps();
  const Eigen::ArrayXd wt = w.col(i).array();
  const Eigen::ArrayXd wT = w.col(n).array();
  Eigen::ArrayXd out = problem.terminal(TerminalArgs{i, g[i], wt, wT, g.start(), g.horizon()});
  if (out.size() != w.rows()) throw ShapeError("terminal: wrong output length");
  require_finite(out, "terminal", i, n);
  return out;
}

SurfaceField surface_like(const Driver& driver, Region region, Extension extension) {
  return SurfaceField(driver.grid(), driver.paths.shared_values(), region, extension);
}

// Sets the lower cells to copies of the upper ones.
void mirror(SurfaceField& z) {
  const Index n = z.size();
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (z.defined(i, j)) z.set_cell(j, i, z.cell(i, j));
  z.set_region(Region::full);
  z.set_extension(Extension::symmetric);
}

double update_norm(const AdaptedField& y0, const SurfaceField& z0, const AdaptedField& y1,
                   const SurfaceField& z1) {
  return std::sqrt(y_distance_sq(y0, y1) + z_distance_sq(z0, z1, CellSet::upper));
}

SurfaceField zero_surface(const Driver& driver, Extension extension) {
  SurfaceField z = surface_like(driver, Region::full, extension);
  for (Index i = 0; i < z.size(); ++i)
    for (Index j = 0; j < z.size(); ++j) z.set_cell(i, j, CellPoly::constant(0.0, std::max(i, j)));
  return z;
}

Projector make_projector(const Driver& driver, const BasisSpec& basis) {
  return Projector(driver.paths, basis, driver.weights);
}

// Fixed-point iteration of the map (y, z) -> solution of the family with
// frozen y and zeta, on row blocks processed from the latest one backwards.
class PicardRun {
 public:
  PicardRun(const ProblemSpec& problem, const Projector& projector, const Driver& driver,
            const SolverConfig& config)
      : problem_(problem), projector_(projector), driver_(driver), config_(config) {
    const Index m = driver.paths.paths();
    const Index n = problem.grid.steps();
    report_.y = AdaptedField{problem.grid, Eigen::MatrixXd::Zero(m, n + 1)};
    report_.z = zero_surface(driver, Extension::symmetric);
    report_.iterations = 0;
    report_.converged = true;
  }

  SolveReport run() {
    block(0, problem_.grid.steps() + 1, 0);
    return std::move(report_);
  }

 private:
  void block(Index begin, Index end, int depth) {
    double previous = 0.0;
    for (int k = 1; k <= config_.max_iter; ++k) {
      SweepRules rules;
      rules.frozen_y = &report_.y;
      rules.frozen_zeta = &report_.z;
      rules.row_begin = begin;
      rules.row_end = end;
      const SweepResult step = family_bsde_sweep(problem_, projector_, driver_, rules);

      AdaptedField y = report_.y;
      y.values.middleCols(begin, end - begin) = step.y.values.middleCols(begin, end - begin);
      SurfaceField z = report_.z;
      for (Index i = begin; i < end; ++i)
        for (Index j = i; j < z.size() - 1; ++j) {
          z.set_cell(i, j, step.z.cell(i, j));
          z.set_cell(j, i, step.z.cell(i, j));
        }

      const double update = update_norm(report_.y, report_.z, y, z);
      const double size = s2_norm(y, z);
      report_.y = std::move(y);
      report_.z = std::move(z);
      ++report_.iterations;
      report_.update_norms.push_back(update);
      if (k > 1) report_.contraction_ratios.push_back(previous > 0.0 ? update / previous : 0.0);
      if (update <= config_.tol * (1.0 + size)) {
        report_.blocks.emplace_back(begin, end);
        return;
      }
      const bool expanding = k > 2 && update > previous;
      if (expanding && end - begin > 2 && depth < 8) {
        const Index mid = begin + (end - begin) / 2;
        block(mid, end, depth + 1);
        block(begin, mid, depth + 1);
        return;
      }
      previous = update;
    }
    report_.converged = false;
    report_.blocks.emplace_back(begin, end);
    throw NonConvergence("picard: no convergence on rows [" + std::to_string(begin) + "," +
                             std::to_string(end) + ") after " + std::to_string(config_.max_iter) +
                             " iterations",
                         report_);
  }

  const ProblemSpec& problem_;
  const Projector& projector_;
  const Driver& driver_;
  const SolverConfig& config_;
  SolveReport report_;
};

SolveReport single_pass(const ProblemSpec& problem, const Projector& projector,
                        const Driver& driver, const SolverConfig& config) {
  SweepRules rules;
  rules.record_node = config.stitch_node;
  SweepResult sweep = family_bsde_sweep(problem, projector, driver, rules);
  SolveReport report;
  report.y = std::move(sweep.y);
  report.z = std::move(sweep.z);
  report.stitched = std::move(sweep.recorded);
  report.blocks.emplace_back(0, problem.grid.steps() + 1);
  return report;
}

}  // namespace

SweepResult family_bsde_sweep(const ProblemSpec& problem, const Driver& driver,
                              const SolverConfig& config, const SweepRules& rules) {
  validate(problem, driver, config);
  return family_bsde_sweep(problem, make_projector(driver, config.basis), driver, rules);
}

SweepResult family_bsde_sweep(const ProblemSpec& problem, const Projector& projector,
                              const Driver& driver, const SweepRules& rules) {
  const TimeGrid& grid = problem.grid;
  const Index n = grid.steps();
  const Index m = driver.paths.paths();
  const double dt = grid.dt();
  const Index begin = rules.row_begin;
  const Index end = rules.row_end < 0 ? n + 1 : rules.row_end;
  if (begin < 0 || end > n + 1 || begin >= end) throw ValidationError("sweep: bad row range");
  if (!rules.frozen_y && end != n + 1) {
    throw ValidationError("sweep: a partial row range needs a frozen Y");
  }
  if (rules.frozen_y && (!(rules.frozen_y->grid == grid) || rules.frozen_y->paths() != m)) {
    throw ShapeError("sweep: frozen Y does not match the ensemble");
  }
  if (rules.frozen_zeta && rules.frozen_zeta->paths() != m) {
    throw ShapeError("sweep: frozen zeta does not match the ensemble");
  }
  if (!(projector.driver().grid() == grid)) throw ShapeError("sweep: projector grid differs");

  const Eigen::MatrixXd& w = driver.observed_values();
  const Eigen::MatrixXd& dw = driver.paths.increments();

  SweepResult out;
  out.y = AdaptedField{grid, Eigen::MatrixXd::Zero(m, n + 1)};
  out.z = surface_like(driver, Region::upper, Extension::none);

  const Index rows = end - begin;
  Eigen::MatrixXd lam(m, rows);  // column r holds Lambda(begin + r, current level)
  for (Index r = 0; r < rows; ++r) lam.col(r) = terminal_at(problem, w, begin + r).matrix();
  if (end == n + 1) out.y.values.col(n) = lam.col(rows - 1);
  if (rules.record_node && *rules.record_node == n) out.recorded = lam;

  const Eigen::MatrixXd& ysource = rules.frozen_y ? rules.frozen_y->values : out.y.values;
  Eigen::MatrixXd targets(m, rows + 1);
  Eigen::ArrayXd yj(m);
  for (Index j = n - 1; j >= begin; --j) {
    const Index active = std::min(end, j + 1) - begin;
    const bool has_diagonal = j < end;  // row j is part of the sweep
    const Eigen::MatrixXd x = projector.features(j);

    // The diagonal cell reads E_j[Y(t_{j+1})]: the only Y values known when
    // level j starts are those at later nodes.
    targets.leftCols(active) = lam.leftCols(active);
    const Index cols = active + (has_diagonal ? 1 : 0);
    if (has_diagonal) {
      targets.col(active) = ysource.col(j + 1);
    }
    const Eigen::MatrixXd expect = x * projector.fit(j, x, targets.leftCols(cols));
    const Eigen::MatrixXd scaled =
        ((lam.leftCols(active) - expect.leftCols(active)).array().colwise() *
         dw.col(j).array()) /
        dt;
    const Eigen::MatrixXd zcoef = projector.fit(j, x, scaled);
    const Eigen::MatrixXd zval = x * zcoef;
    for (Index r = 0; r < active; ++r) out.z.set_cell(begin + r, j, projector.cell(j, zcoef.col(r)));

    auto zeta_of = [&](Index r) -> Eigen::ArrayXd {
      if (rules.frozen_zeta) return rules.frozen_zeta->values(j, begin + r);
      return zval.col(r).array();
    };
    auto step = [&](Index r, const Eigen::ArrayXd& y) {
      const Index i = begin + r;
      lam.col(r) = expect.col(r) +
                   dt * generator_at(problem, w, i, j, y, zval.col(r).array(), zeta_of(r)).matrix();
    };

    // Diagonal row first, then the rows i < j with Y(t_j) = Lambda(j, j).
    if (has_diagonal) {
      step(j - begin, expect.col(active).array());
      out.y.values.col(j) = lam.col(j - begin);
    }
    yj = ysource.col(j).array();
    for (Index r = 0; r < active; ++r)
      if (begin + r != j) step(r, yj);
    if (rules.record_node && *rules.record_node == j) out.recorded = lam.leftCols(active);
  }
  return out;
}

SolveReport solve_s(const ProblemSpec& problem, const Driver& driver, const SolverConfig& config) {
  validate(problem, driver, config);
  const Projector projector = make_projector(driver, config.basis);
  SolveReport report;
  if (config.picard) {
    report = PicardRun(problem, projector, driver, config).run();
    if (config.stitch_node) report.stitched = single_pass(problem, projector, driver, config).stitched;
  } else {
    report = single_pass(problem, projector, driver, config);
  }
  mirror(report.z);
  report.mode = SolveMode::s_solution;
  return report;
}

SolveReport solve_m(const ProblemSpec& problem, const Driver& driver, const SolverConfig& config) {
  validate(problem, driver, config);
  const Projector projector = make_projector(driver, config.basis);
  if (!problem.generator.depends_on_zeta()) {
    SolveReport report = single_pass(problem, projector, driver, config);
    report.z = merge_lower(report.z, extend_martingale(report.y, projector), Extension::martingale);
    report.mode = SolveMode::m_solution;
    return report;
  }

  // Picard on the zeta surface: lower cells from the martingale
  // representation of the previous Y, diagonal from the previous Z(t, t).
  SolveReport report;
  report.mode = SolveMode::m_solution;
  report.iterations = 0;
  SurfaceField zeta = zero_surface(driver, Extension::martingale);
  AdaptedField y_prev{problem.grid, Eigen::MatrixXd::Zero(driver.paths.paths(),
                                                          problem.grid.steps() + 1)};
  SurfaceField z_prev = zeta;
  double previous = 0.0;
  for (int k = 1; k <= config.max_iter; ++k) {
    SweepRules rules;
    rules.frozen_zeta = &zeta;
    rules.record_node = config.stitch_node;
    SweepResult step = family_bsde_sweep(problem, projector, driver, rules);
    SurfaceField z = merge_lower(step.z, extend_martingale(step.y, projector), Extension::martingale);

    const double update = update_norm(y_prev, z_prev, step.y, z);
    const double size = s2_norm(step.y, z);
    ++report.iterations;
    report.update_norms.push_back(update);
    if (k > 1) report.contraction_ratios.push_back(previous > 0.0 ? update / previous : 0.0);
    previous = update;

    for (Index i = 0; i + 1 < zeta.size(); ++i) {
      zeta.set_cell(i, i, z.cell(i, i));
      for (Index j = 0; j < i; ++j) zeta.set_cell(i, j, z.cell(i, j));
    }
    y_prev = std::move(step.y);
    z_prev = std::move(z);
    report.stitched = std::move(step.recorded);
    if (update <= config.tol * (1.0 + size)) {
      report.y = std::move(y_prev);
      report.z = std::move(z_prev);
      report.blocks.emplace_back(0, problem.grid.steps() + 1);
      return report;
    }
  }
  report.y = std::move(y_prev);
  report.z = std::move(z_prev);
  report.converged = false;
  throw NonConvergence("m-solution: no convergence after " + std::to_string(config.max_iter) +
                           " iterations",
                       report);
}

SolveReport solve_adapted41(const ProblemSpec& problem, const Driver& driver,
                            const SolverConfig& config) {
  ProblemSpec averaged = problem;
  averaged.generator = problem.generator.averaged();
  SolverConfig s_config = config;
  s_config.mode = SolveMode::s_solution;
  SolveReport report = solve_s(averaged, driver, s_config);
  SurfaceField upper = surface_like(driver, Region::upper, Extension::none);
  for (Index i = 0; i < upper.size(); ++i)
    for (Index j = i; j < upper.size(); ++j)
      if (report.z.defined(i, j)) upper.set_cell(i, j, report.z.cell(i, j));
  report.z = std::move(upper);
  report.mode = SolveMode::adapted41;
  return report;
}

SolveReport solve(const ProblemSpec& problem, const Driver& driver, const SolverConfig& config) {
  switch (config.mode) {
    case SolveMode::s_solution: return solve_s(problem, driver, config);
    case SolveMode::m_solution: return solve_m(problem, driver, config);
    case SolveMode::adapted41: return solve_adapted41(problem, driver, config);
  }
  throw ValidationError("solver: unknown mode");
}

SurfaceField extend_symmetric(const SurfaceField& upper) {
  if (upper.region() != Region::upper) {
    throw ShapeError("extend_symmetric: input must be an upper-triangle surface");
  }
  SurfaceField out = upper;
  mirror(out);
  return out;
}

SurfaceField extend_martingale(const AdaptedField& y, const Projector& projector) {
  const PathEnsemble& ens = projector.driver();
  const Index n = y.grid.steps();
  if (!(y.grid == ens.grid()) || y.paths() != ens.paths()) {
    throw ShapeError("extend_martingale: Y does not match the ensemble");
  }
  SurfaceField out(y.grid, ens.shared_values(), Region::full, Extension::martingale);
  // Column c of v holds E[Y(t_{c+1}) | F_{j+1}] at level j: the tower chain
  // keeps each regression target one step away from its conditioning node.
  Eigen::MatrixXd v = y.values.rightCols(n);
  for (Index j = n - 1; j >= 0; --j) {
    const Eigen::MatrixXd x = projector.features(j);
    const Index first = j;  // column of row i = j + 1
    const auto current = v.middleCols(first, n - first);
    const Eigen::MatrixXd coef = projector.fit(j, x, current);
    const Eigen::MatrixXd expect = x * coef;
    const Eigen::MatrixXd scaled =
        ((current - expect).array().colwise() * ens.increments().col(j).array()) /
        y.grid.dt();
    const Eigen::MatrixXd zcoef = projector.fit(j, x, scaled);
    for (Index c = 0; c < n - first; ++c) out.set_cell(first + c + 1, j, projector.cell(j, zcoef.col(c)));
    v.middleCols(first, n - first) = expect;
  }
  return out;
}

SurfaceField extend_martingale(const AdaptedField& y, const PathEnsemble& ensemble,
                               const BasisSpec& basis) {
  return extend_martingale(y, Projector(ensemble, basis));
}

SurfaceField merge_lower(const SurfaceField& upper, const SurfaceField& lower,
                         Extension extension) {
  if (!(upper.grid() == lower.grid()) || upper.paths() != lower.paths()) {
    throw ShapeError("merge_lower: surfaces differ in shape");
  }
  SurfaceField out = upper;
  for (Index i = 1; i < out.size(); ++i)
    for (Index j = 0; j < i; ++j)
      if (lower.defined(i, j)) out.set_cell(i, j, lower.cell(i, j));
  out.set_region(Region::full);
  out.set_extension(extension);
  return out;
}

Eigen::VectorXd martingale_reconstruction_error(const AdaptedField& y, const SurfaceField& z,
                                                const PathEnsemble& ensemble) {
  const Index n = y.grid.steps();
  if (!(y.grid == ensemble.grid()) || y.paths() != ensemble.paths()) {
    throw ShapeError("reconstruction: Y does not match the ensemble");
  }
  Eigen::VectorXd err(n + 1);
  for (Index i = 0; i <= n; ++i) {
    Eigen::ArrayXd rebuilt = Eigen::ArrayXd::Constant(y.paths(), y.values.col(i).mean());
    for (Index j = 0; j < i; ++j) rebuilt += z.values(i, j) * ensemble.increments().col(j).array();
    err[i] = std::sqrt((y.values.col(i).array() - rebuilt).square().mean());
  }
  return err;
}

ResidualReport residual(const ProblemSpec& problem, const AdaptedField& y, const SurfaceField& z,
                        const Driver& driver, ResidualForm form) {
  const TimeGrid& grid = problem.grid;
  const Index n = grid.steps();
  if (!(y.grid == grid) || !(z.grid() == grid) || !(driver.grid() == grid) ||
      y.paths() != driver.paths.paths() || z.paths() != driver.paths.paths()) {
    throw ShapeError("residual: fields are not on the problem grid");
  }
  const Eigen::MatrixXd& w = driver.observed_values();
  const Eigen::MatrixXd& dw = driver.paths.increments();
  const double dt = grid.dt();
  ResidualReport out;
  out.per_node.resize(n + 1);
  for (Index i = 0; i <= n; ++i) {
    Eigen::ArrayXd drift = Eigen::ArrayXd::Zero(y.paths());
    Eigen::ArrayXd ito = Eigen::ArrayXd::Zero(y.paths());
    for (Index j = i; j < n; ++j) {
      const Eigen::ArrayXd zij = z.values(i, j);
      const Eigen::ArrayXd zji = z.values(j, i);
      drift += generator_at(problem, w, i, j, y.values.col(j).array(), zij, zji);
      ito += (form == ResidualForm::row ? zij : zji) * dw.col(j).array();
    }
    const Eigen::ArrayXd r =
        y.values.col(i).array() - (terminal_at(problem, w, i) + dt * drift - ito);
    out.per_node[i] = std::sqrt(r.square().mean());
  }
  out.rms = std::sqrt(dt * out.per_node.head(n).squaredNorm());
  out.max = out.per_node.maxCoeff();
  return out;
}

}  // namespace bsvie
