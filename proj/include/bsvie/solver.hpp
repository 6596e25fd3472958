#pragma once

#include "bsvie/ensemble.hpp"
#include "bsvie/fields.hpp"
#include "bsvie/problem.hpp"
#include "bsvie/regression.hpp"

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bsvie {

/// The Brownian information a solve runs on.
///
/// `paths` supplies the regression state and the increments that Z is
/// measured against. `weights` (M x N one-step likelihood ratios) switch the
/// projections to another measure. `observed` is the path W that the terminal
/// and generator read through wt, wT and w; it defaults to `paths`.
struct Driver {
  PathEnsemble paths;
  std::shared_ptr<const Eigen::MatrixXd> weights;
  std::shared_ptr<const Eigen::MatrixXd> observed;

  Driver() = default;
  Driver(PathEnsemble ensemble) : paths(std::move(ensemble)) {}  // NOLINT: implicit by design

  const Eigen::MatrixXd& observed_values() const { return observed ? *observed : paths.values(); }
  const TimeGrid& grid() const noexcept { return paths.grid(); }
};

enum class SolveMode { s_solution, m_solution, adapted41 };

struct SolverConfig {
  BasisSpec basis;
  double tol = 1e-6;  // relative S^2 update norm that stops a Picard loop
  int max_iter = 50;
  SolveMode mode = SolveMode::s_solution;
  /// For S-solutions: iterate the frozen-coefficient map instead of the
  /// diagonal sweep.
  bool picard = false;
  /// Records Lambda(t_i, t_k) for i <= k at this node.
  std::optional<Index> stitch_node;
};

struct SolveReport {
  AdaptedField y;
  SurfaceField z;
  SolveMode mode = SolveMode::s_solution;
  int iterations = 1;
  std::vector<double> update_norms;        // S^2 norm of each Picard update
  std::vector<double> contraction_ratios;  // update_norms[k] / update_norms[k-1]
  bool converged = true;
  /// Row blocks [begin, end) of the Picard iteration, latest first.
  std::vector<std::pair<Index, Index>> blocks;
  /// M x (k+1) values Lambda(t_i, t_k) when a stitch node k was requested.
  std::optional<Eigen::MatrixXd> stitched;
};

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, SolveReport report)
      : std::runtime_error(what), report_(std::make_shared<SolveReport>(std::move(report))) {}
  const SolveReport& report() const noexcept { return *report_; }

 private:
  std::shared_ptr<SolveReport> report_;
};

/// How the sweep fills the y and zeta slots of the generator.
struct SweepRules {
  /// Y(s) read from this field. When null, Y(t_j) = Lambda(t_j, t_j) is solved
  /// at each level before the rows i < j use it.
  const AdaptedField* frozen_y = nullptr;
  /// Z(s, t) read from this (full) surface. When null, zeta := z.
  const SurfaceField* frozen_zeta = nullptr;
  /// Outer rows [row_begin, row_end). A negative end means all rows.
  Index row_begin = 0;
  Index row_end = -1;
  std::optional<Index> record_node;
};

struct SweepResult {
  /// Diagonal Lambda(t_i, t_i) for the rows of the sweep (zero elsewhere).
  AdaptedField y;
  /// Z(t_i, t_j), j >= i, for the rows of the sweep.
  SurfaceField z;
  std::optional<Eigen::MatrixXd> recorded;
};

/// Backward Euler for the BSDE family parameterized by the outer time:
///   Z(i,j)      = martingale coefficient of Lambda(i, j+1) at t_j
///   Lambda(i,j) = E_j[Lambda(i, j+1)] + dt * g(t_i, t_j, Y(t_j), Z(i,j), zeta(i,j))
/// with Lambda(i, N) = Psi(t_i).
SweepResult family_bsde_sweep(const ProblemSpec& problem, const Driver& driver,
                              const SolverConfig& config, const SweepRules& rules = {});
SweepResult family_bsde_sweep(const ProblemSpec& problem, const Projector& projector,
                              const Driver& driver, const SweepRules& rules);

SolveReport solve_s(const ProblemSpec& problem, const Driver& driver, const SolverConfig& config);
SolveReport solve_m(const ProblemSpec& problem, const Driver& driver, const SolverConfig& config);
/// Adapted solution of the zeta-free equation with generator f(t, s, y, z):
/// the S-solution of g = f(t, s, y, (z + zeta) / 2) restricted to t <= s.
SolveReport solve_adapted41(const ProblemSpec& problem, const Driver& driver,
                            const SolverConfig& config);
/// Dispatches on config.mode.
SolveReport solve(const ProblemSpec& problem, const Driver& driver, const SolverConfig& config);

/// Mirrors the upper triangle: Z(j, i) := Z(i, j). The copy is exact.
SurfaceField extend_symmetric(const SurfaceField& upper);

/// Lower cells Z(i, j), i > j, from the martingale representation of Y(t_i)
/// over [t_0, t_i]. Returns a full-region surface with only the lower cells set.
SurfaceField extend_martingale(const AdaptedField& y, const Projector& projector);
SurfaceField extend_martingale(const AdaptedField& y, const PathEnsemble& ensemble,
                               const BasisSpec& basis = {});

/// Copies the lower cells of `lower` into a copy of `upper`.
SurfaceField merge_lower(const SurfaceField& upper, const SurfaceField& lower,
                         Extension extension);

/// Per-node RMS of Y(t_i) - E[Y(t_i)] - sum_{j<i} Z(i,j) dW_j.
Eigen::VectorXd martingale_reconstruction_error(const AdaptedField& y, const SurfaceField& z,
                                                const PathEnsemble& ensemble);

/// Which Z the stochastic integral of the residual uses: Z(t, s) or Z(s, t).
enum class ResidualForm { row, column };

struct ResidualReport {
  Eigen::VectorXd per_node;  // RMS over paths, nodes 0..N
  double rms = 0.0;          // sqrt(dt * sum_{i<N} per_node^2)
  double max = 0.0;
};

ResidualReport residual(const ProblemSpec& problem, const AdaptedField& y, const SurfaceField& z,
                        const Driver& driver, ResidualForm form);

}  // namespace bsvie
