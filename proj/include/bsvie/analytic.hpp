#pragma once

#include "bsvie/ensemble.hpp"
#include "bsvie/fields.hpp"
#include "bsvie/problem.hpp"
#include "bsvie/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bsvie {

/// Closed-form examples. The string ids are the stable CLI names.
///   eq43             Psi = t T W(T), g = -t y / s^2 on [0.5, 1]
///   eq44             Psi = W(T)(T+1)(t+1), g = -(t+1) y / (s+1)^2 on [0, 1]
///   eq48-49          the eq43 data with the two diffusion conventions
///   zero             Psi = 0 and a zeta-dependent g with g(t,s,0,0) = 0
///   corrected-intro  Psi = t W(T)^2, g = -t on [0, 1]
enum class CaseId { eq43, eq44, eq48_49, zero, corrected_intro };

std::string_view case_name(CaseId id);
CaseId parse_case_id(std::string_view name);

struct ReferenceCase {
  CaseId id = CaseId::eq43;
  double start = 0.0;
  double horizon = 1.0;
  std::string generator;
  std::string terminal;
  bool has_m_solution = true;

  /// Closed-form values. W arguments are the Brownian values at the
  /// respective times.
  double y(double t, double w_t) const;
  /// S-solution Z(t, s) on the whole square.
  double z_s(double t, double s, double w_t, double w_s) const;
  /// M-solution Z(t, s) for t > s.
  double z_m(double t, double s, double w_t, double w_s) const;
};

ReferenceCase reference_case(CaseId id);
TimeGrid case_grid(const ReferenceCase& c, Index steps);
ProblemSpec case_problem(const ReferenceCase& c, Index steps);

struct ReferenceFields {
  AdaptedField y;
  SurfaceField z_s;                  // symmetric, full square
  std::optional<SurfaceField> z_m;   // upper from the equation, lower from the representation
  /// For eq48-49: the field Z2 of the column-diffusion equation, Z2(t,s) = Z1(s,t).
  std::optional<SurfaceField> z_column;
};

ReferenceFields reference_fields(const ReferenceCase& c, const PathEnsemble& ensemble);

/// Region-wise relative errors against the reference. Relative errors use
/// the reference norm as denominator unless it is below 1e-12, in which case
/// the absolute error is reported.
struct ErrorReport {
  double y = 0.0;
  double z_upper = 0.0;
  double z_lower = 0.0;  // NaN when the numeric field has no lower triangle
  double z_diagonal = 0.0;
};

ErrorReport error_metrics(const AdaptedField& y, const SurfaceField& z,
                          const AdaptedField& y_ref, const SurfaceField& z_ref);
/// Picks the reference lower triangle that matches the report's mode.
ErrorReport error_metrics(const SolveReport& numeric, const ReferenceFields& reference);

struct Level {
  Index steps = 0;
  Index paths = 0;
};

struct ConvergenceRow {
  Level level;
  ErrorReport errors;
  std::optional<double> order_y;        // log2 ratio of consecutive errors per halving of dt
  std::optional<double> order_z_upper;
  double residual_rms = 0.0;            // of the reference fields
  int iterations = 1;
  double seconds = 0.0;
};

std::vector<ConvergenceRow> convergence_study(const ReferenceCase& c, const std::vector<Level>& levels,
                                              const SolverConfig& config, std::uint64_t seed);

}  // namespace bsvie
