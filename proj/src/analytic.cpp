#include "bsvie/analytic.hpp"

#include "bsvie/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

namespace bsvie {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// a + b * W(t_anchor)
CellPoly affine_cell(double a, double b, Index anchor) {
  CellPoly c;
  c.anchor = anchor;
  c.coeffs = Eigen::Vector2d(a, b);
  return c;
}

double relative(double dist_sq, double ref_sq) {
  const double ref = std::sqrt(ref_sq);
  return ref < 1e-12 ? std::sqrt(dist_sq) : std::sqrt(dist_sq) / ref;
}

}  // namespace

std::string_view case_name(CaseId id) {
  switch (id) {
    case CaseId::eq43: return "eq43";
    case CaseId::eq44: return "eq44";
    case CaseId::eq48_49: return "eq48-49";
    case CaseId::zero: return "zero";
    case CaseId::corrected_intro: return "corrected-intro";
  }
  return "?";
}

CaseId parse_case_id(std::string_view name) {
  for (CaseId id : {CaseId::eq43, CaseId::eq44, CaseId::eq48_49, CaseId::zero,
                    CaseId::corrected_intro}) {
    if (case_name(id) == name) return id;
  }
  throw ValidationError("unknown case '" + std::string(name) +
                        "' (expected eq43, eq44, eq48-49, zero, corrected-intro)");
}

ReferenceCase reference_case(CaseId id) {
  ReferenceCase c;
  c.id = id;
  switch (id) {
    case CaseId::eq43:
    case CaseId::eq48_49:
      c.start = 0.5;
      c.generator = "-t*y/s^2";
      c.terminal = "t*T*wT";
      break;
    case CaseId::eq44:
      c.generator = "-(t+1)*y/(s+1)^2";
      c.terminal = "wT*(T+1)*(t+1)";
      break;
    case CaseId::zero:
      c.generator = "0.5*sin(zeta) - t*y/(1+s)";
      c.terminal = "0";
      break;
    case CaseId::corrected_intro:
      c.generator = "-t";
      c.terminal = "t*wT^2";
      break;
  }
  return c;
}

double ReferenceCase::y(double t, double w) const {
  switch (id) {
    case CaseId::eq43:
    case CaseId::eq48_49: return t * t * w;
    case CaseId::eq44: return (t + 1) * (t + 1) * w;
    case CaseId::zero: return 0.0;
    case CaseId::corrected_intro: return t * w * w;
  }
  return kNaN;
}

double ReferenceCase::z_s(double t, double s, double w_t, double w_s) const {
  switch (id) {
    case CaseId::eq43:
    case CaseId::eq48_49: return t * s;
    case CaseId::eq44: return (t + 1) * (s + 1);
    case CaseId::zero: return 0.0;
    case CaseId::corrected_intro: return t <= s ? 2 * t * w_s : 2 * s * w_t;
  }
  return kNaN;
}

double ReferenceCase::z_m(double t, double /*s*/, double /*w_t*/, double w_s) const {
  switch (id) {
    case CaseId::eq43:
    case CaseId::eq48_49: return t * t;
    case CaseId::eq44: return (t + 1) * (t + 1);
    case CaseId::zero: return 0.0;
    case CaseId::corrected_intro: return 2 * t * w_s;
  }
  return kNaN;
}

TimeGrid case_grid(const ReferenceCase& c, Index steps) {
  return build_grid(c.horizon, steps, c.start);
}

ProblemSpec case_problem(const ReferenceCase& c, Index steps) {
  ProblemSpec p;
  p.grid = case_grid(c, steps);
  p.generator = Generator::parse(c.generator);
  p.terminal = Terminal::parse(c.terminal);
  p.label = std::string(case_name(c.id));
  return p;
}

ReferenceFields reference_fields(const ReferenceCase& c, const PathEnsemble& ensemble) {
  const TimeGrid& g = ensemble.grid();
  if (g.start() != c.start || g.horizon() != c.horizon) {
    throw ValidationError("reference_fields: ensemble interval does not match case " +
                          std::string(case_name(c.id)));
  }
  const Index n = g.steps();
  const Eigen::MatrixXd& w = ensemble.values();
  ReferenceFields out;
  out.y = AdaptedField{g, Eigen::MatrixXd(w.rows(), n + 1)};
  for (Index i = 0; i <= n; ++i)
    out.y.values.col(i) = w.col(i).unaryExpr([&](double x) { return c.y(g[i], x); });

  SurfaceField zs(g, ensemble.shared_values(), Region::full, Extension::symmetric);
  SurfaceField zm(g, ensemble.shared_values(), Region::full, Extension::martingale);
  for (Index i = 0; i <= n; ++i) {
    const double t = g[i];
    for (Index j = 0; j <= n; ++j) {
      const double s = g[j];
      if (c.id == CaseId::corrected_intro) {
        // Z_S is 2 min(t,s) W(max(t,s)); Z_M below the diagonal is 2 t W(s).
        const Index hi = std::max(i, j);
        zs.set_cell(i, j, affine_cell(0.0, 2.0 * std::min(t, s), hi));
        zm.set_cell(i, j, i > j ? affine_cell(0.0, 2.0 * t, j) : zs.cell(i, j));
      } else {
        zs.set_cell(i, j, CellPoly::constant(c.z_s(t, s, 0.0, 0.0), std::max(i, j)));
        zm.set_cell(i, j, i > j ? CellPoly::constant(c.z_m(t, s, 0.0, 0.0), j) : zs.cell(i, j));
      }
    }
  }
  if (c.id == CaseId::eq48_49) {
    SurfaceField col(g, ensemble.shared_values(), Region::full, Extension::none);
    for (Index i = 0; i <= n; ++i)
      for (Index j = 0; j <= n; ++j) {
        CellPoly cell = zm.cell(j, i);
        cell.anchor = std::max(i, j);
        col.set_cell(i, j, cell);
      }
    out.z_column = std::move(col);
  }
  out.z_s = std::move(zs);
  if (c.has_m_solution) out.z_m = std::move(zm);
  return out;
}

ErrorReport error_metrics(const AdaptedField& y, const SurfaceField& z, const AdaptedField& y_ref,
                          const SurfaceField& z_ref) {
  ErrorReport r;
  r.y = relative(y_distance_sq(y, y_ref), y_l2(y_ref));
  r.z_upper = relative(z_distance_sq(z, z_ref, CellSet::upper), z_l2(z_ref, CellSet::upper));
  r.z_diagonal =
      relative(z_distance_sq(z, z_ref, CellSet::diagonal), z_l2(z_ref, CellSet::diagonal));
  r.z_lower = z.region() == Region::full
                  ? relative(z_distance_sq(z, z_ref, CellSet::lower), z_l2(z_ref, CellSet::lower))
                  : kNaN;
  return r;
}

ErrorReport error_metrics(const SolveReport& numeric, const ReferenceFields& reference) {
  const SurfaceField& z_ref =
      numeric.mode == SolveMode::m_solution && reference.z_m ? *reference.z_m : reference.z_s;
  return error_metrics(numeric.y, numeric.z, reference.y, z_ref);
}

std::vector<ConvergenceRow> convergence_study(const ReferenceCase& c,
                                              const std::vector<Level>& levels,
                                              const SolverConfig& config, std::uint64_t seed) {
  for (std::size_t k = 1; k < levels.size(); ++k) {
    if (levels[k].steps < levels[k - 1].steps) {
      throw ValidationError("convergence_study: levels must be sorted by N");
    }
  }
  // All levels share the Brownian paths of the finest level when its step
  // count is a multiple of every other one.
  std::optional<PathEnsemble> finest;
  if (!levels.empty()) {
    Index n_max = 0, m_max = 0;
    for (const Level& l : levels) {
      n_max = std::max(n_max, l.steps);
      m_max = std::max(m_max, l.paths);
    }
    const bool nested = std::all_of(levels.begin(), levels.end(),
                                    [n_max](const Level& l) { return l.steps > 0 && n_max % l.steps == 0; });
    if (nested) finest = sample_ensemble(case_grid(c, n_max), m_max, seed);
  }
  std::vector<ConvergenceRow> rows;
  for (const Level& level : levels) {
    const auto begin = std::chrono::steady_clock::now();
    const ProblemSpec problem = case_problem(c, level.steps);
    const PathEnsemble ens = finest ? coarsen(*finest, level.steps, level.paths)
                                    : sample_ensemble(problem.grid, level.paths, seed);
    const SolveReport rep = solve(problem, Driver(ens), config);
    const ReferenceFields ref = reference_fields(c, ens);

    ConvergenceRow row;
    row.level = level;
    row.errors = error_metrics(rep, ref);
    row.iterations = rep.iterations;
    row.residual_rms = residual(problem, ref.y, ref.z_s, Driver(ens), ResidualForm::row).rms;
    if (!rows.empty()) {
      const ConvergenceRow& prev = rows.back();
      const double h = std::log2(static_cast<double>(level.steps) /
                                 static_cast<double>(prev.level.steps));
      if (h > 0.0) {
        auto order = [h](double coarse, double fine) -> std::optional<double> {
          if (!(coarse > 0.0) || !(fine > 0.0)) return std::nullopt;
          return std::log2(coarse / fine) / h;
        };
        row.order_y = order(prev.errors.y, row.errors.y);
        row.order_z_upper = order(prev.errors.z_upper, row.errors.z_upper);
      }
    }
    row.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
    rows.push_back(row);
  }
  return rows;
}

}  // namespace bsvie
