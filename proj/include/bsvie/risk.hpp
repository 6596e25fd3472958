#pragma once

#include "bsvie/girsanov.hpp"
#include "bsvie/problem.hpp"
#include "bsvie/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bsvie {

/// Generator f(t, s, y) of the risk equation.
///   linear: eta(s) * y          abs: eta(s) * |y|          custom: any f(t, s, y)
enum class RiskPreset { linear, abs, custom };
enum class RiskRoute { direct, girsanov };

/// rho(t; psi) = Y(t) where
///   Y(t) = -psi(t) + int_t^T (f(t,s,Y(s)) + r1(s) Z(t,s) + r2(s) Z(s,t)) ds - int_t^T Z(t,s) dW(s).
struct RiskSpec {
  TimeGrid grid;
  RiskPreset preset = RiskPreset::linear;
  expr::Expr eta = expr::parse("0");  // deterministic in s
  std::optional<expr::Expr> f;        // custom preset only
  Terminal position = Terminal::constant(0.0);
  DriftSpec drift = DriftSpec::none();
  RiskRoute route = RiskRoute::direct;
  double lipschitz = std::numeric_limits<double>::quiet_NaN();
};

/// Identifies a run for common-random-number comparisons.
struct RunFingerprint {
  std::uint64_t seed = 0;
  Index paths = 0;
  Index steps = 0;
  double start = 0.0;
  double horizon = 0.0;
  int degree = 0;
  double ridge = 0.0;
  RiskRoute route = RiskRoute::direct;
  std::string generator;
  std::string drift;

  friend bool operator==(const RunFingerprint&, const RunFingerprint&) = default;
};

struct RiskRun {
  AdaptedField rho;
  SolveReport report;
  RunFingerprint fingerprint;
};

/// f as an expression in (t, s, y).
expr::Expr risk_generator_expr(const RiskSpec& spec);
/// The BSVIE solved by a route: f + r1 z + r2 zeta for `direct`, f alone for
/// `girsanov`; the terminal is -psi.
ProblemSpec risk_problem(const RiskSpec& spec, RiskRoute route);

/// The tilt that absorbs the drift terms: -int Z dW = -int Z dW~ - int r Z ds
/// needs W~ = W - int r, so the ensemble is tilted by -r. For S-solutions
/// r2 Z(s,t) = r2 Z(t,s) and both terms are absorbed.
TiltedEnsemble risk_tilt(const RiskSpec& spec, const PathEnsemble& ensemble);

RiskRun rho(const RiskSpec& spec, const PathEnsemble& ensemble, const SolverConfig& config);
/// Same with a precomputed tilt from risk_tilt.
RiskRun rho(const RiskSpec& spec, const TiltedEnsemble& tilted, const SolverConfig& config);

/// Throws ValidationError unless the runs share seed, grid, paths and config.
void require_common_random_numbers(const RiskRun& a, const RiskRun& b);

/// sqrt( sum |a - b|^2 / sum |a|^2 ) over paths and nodes 0..N-1.
double relative_l2_gap(const AdaptedField& a, const AdaptedField& b);
/// sqrt of the grid quadrature of E|rho|^2 divided by the interval length.
double rms_norm(const AdaptedField& rho);

/// The discrete discount factor of the linear scheme for a deterministic
/// position: rho(t_i; c) = -c * D(t_i). Computed by the backward recursion
///   D_i = 1 + dt eta_i D_{i+1} + dt sum_{i < j < N} eta_j D_j.
Eigen::VectorXd discrete_discount(const RiskSpec& spec);
/// exp(int_{t_i}^T eta(s) ds) by trapezoidal quadrature on a fine grid.
Eigen::VectorXd continuous_discount(const RiskSpec& spec);

struct AxiomPerturbations {
  double c = 1.0;       // translation amount
  double lambda = 2.0;  // homogeneity factor
  double shift = 0.5;   // psi_bar = psi + shift, shift >= 0
  Terminal second = Terminal::constant(0.0);  // psi_2 for sub-additivity
  Index pivot = -1;     // past-independence node; negative: N / 2
};

struct AxiomResult {
  std::string name;
  bool applicable = true;
  double max_violation = 0.0;
  /// Root mean square of the violations over nodes before the horizon, the
  /// quadrature of rms_norm. Statistical checks are judged on this value.
  double rms_violation = 0.0;
  bool judged_on_rms = false;
  double tolerance = 0.0;
  Index samples = 0;
  std::vector<double> quantiles;  // 50%, 90%, 99%, 100% of the violations
  bool passed = true;
  std::string note;
};

struct AxiomReport {
  std::vector<AxiomResult> axioms;
  double rho_norm = 0.0;
  double discount_gap = 0.0;  // max |D_discrete - D_continuous| / D_continuous
  RunFingerprint fingerprint;

  bool passed() const;
  const AxiomResult& find(const std::string& name) const;
};

/// Statistical tolerance of monotonicity and sub-additivity, relative to
/// rms_norm(rho) and compared with AxiomResult::rms_violation.
inline constexpr double kAxiomRelativeTolerance = 0.02;
/// Tolerance of the identities that hold exactly for the linear scheme.
inline constexpr double kExactTolerance = 1e-10;

AxiomReport check_axioms(const RiskSpec& spec, const AxiomPerturbations& perturbations,
                         const PathEnsemble& ensemble, const SolverConfig& config);

}  // namespace bsvie
