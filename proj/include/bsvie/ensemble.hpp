#pragma once

#include "bsvie/grid.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>

namespace bsvie {

/// M Brownian paths on a TimeGrid. Column-major storage puts all paths of
/// one node next to each other, which is what the regressions consume.
///
/// The ensemble is immutable; copies share the underlying arrays.
class PathEnsemble {
 public:
  PathEnsemble() = default;

  /// Wraps existing increments (M x N). Cumulative values are rebuilt with
  /// W(t_0) = 0, so W.col(i+1) - W.col(i) == increments.col(i) holds exactly
  /// for every path up to the rounding of the running sum.
  PathEnsemble(TimeGrid grid, Eigen::MatrixXd increments, std::uint64_t seed);

  /// Wraps explicit cumulative values (M x (N+1)) and increments (M x N).
  PathEnsemble(TimeGrid grid, Eigen::MatrixXd values, Eigen::MatrixXd increments,
               std::uint64_t seed);

  const TimeGrid& grid() const noexcept { return grid_; }
  Index paths() const noexcept { return values_ ? values_->rows() : 0; }
  Index steps() const noexcept { return grid_.steps(); }
  std::uint64_t seed() const noexcept { return seed_; }
  int dimension() const noexcept { return 1; }

  /// W(t_i) for all paths, M x (N+1).
  const Eigen::MatrixXd& values() const { return *values_; }
  /// W(t_{j+1}) - W(t_j), M x N.
  const Eigen::MatrixXd& increments() const { return *increments_; }
  std::shared_ptr<const Eigen::MatrixXd> shared_values() const { return values_; }

 private:
  TimeGrid grid_;
  std::shared_ptr<const Eigen::MatrixXd> values_;
  std::shared_ptr<const Eigen::MatrixXd> increments_;
  std::uint64_t seed_ = 0;
};

/// Samples M paths. Path p is drawn from its own engine seeded by (seed, p),
/// so enlarging M appends paths without touching the existing ones.
PathEnsemble sample_ensemble(const TimeGrid& grid, Index paths, std::uint64_t seed);

/// The first `paths` paths of `fine` observed on a grid with `steps`
/// intervals, which must divide fine.steps(). Coarse increments are sums of
/// fine ones, so both ensembles carry the same Brownian paths.
PathEnsemble coarsen(const PathEnsemble& fine, Index steps, Index paths);

/// Left-point Ito sum  sum_{j >= from} H(p, j) * dW(p, j)  for each path.
/// `integrand` is M x N (column j holds the integrand at t_j).
Eigen::VectorXd ito_sum(const Eigen::Ref<const Eigen::MatrixXd>& integrand,
                        const PathEnsemble& ensemble, Index from);

}  // namespace bsvie
