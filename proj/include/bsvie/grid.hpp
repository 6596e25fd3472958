#pragma once

#include <Eigen/Core>

#include <vector>

namespace bsvie {

using Index = Eigen::Index;

/// Uniform partition S = t_0 < t_1 < ... < t_N = T.
///
/// Index predicates split the square of node pairs into the closed upper
/// triangle (i <= j, the region where the equation determines Z) and the open
/// lower triangle (i > j, where Z comes from an extension rule).
class TimeGrid {
 public:
  TimeGrid() = default;

  double start() const noexcept { return start_; }
  double horizon() const noexcept { return horizon_; }
  double span() const noexcept { return horizon_ - start_; }
  Index steps() const noexcept { return steps_; }
  double dt() const noexcept { return dt_; }
  double operator[](Index i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& nodes() const noexcept { return nodes_; }

  static constexpr bool in_upper(Index i, Index j) noexcept { return i <= j; }
  static constexpr bool in_lower(Index i, Index j) noexcept { return i > j; }

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
    return a.start_ == b.start_ && a.horizon_ == b.horizon_ && a.steps_ == b.steps_;
  }

 private:
  friend TimeGrid build_grid(double, Index, double);

  double start_ = 0.0;
  double horizon_ = 1.0;
  Index steps_ = 0;
  double dt_ = 0.0;
  std::vector<double> nodes_;
};

/// Uniform grid on [start, horizon] with `steps` intervals.
/// Throws ValidationError unless horizon > start >= 0 and steps >= 2.
TimeGrid build_grid(double horizon, Index steps, double start = 0.0);

}  // namespace bsvie
