#include "bsvie/grid.hpp"

#include "bsvie/error.hpp"

#include <cmath>
#include <string>

namespace bsvie {

TimeGrid build_grid(double horizon, Index steps, double start) {
  if (!std::isfinite(horizon) || !std::isfinite(start) || start < 0.0 || !(horizon > start)) {
    throw ValidationError("grid: need horizon > start >= 0, got start=" + std::to_string(start) +
                          " horizon=" + std::to_string(horizon));
  }
  if (steps < 2) {
    throw ValidationError("grid: need at least 2 steps, got " + std::to_string(steps));
  }
  TimeGrid g;
  g.start_ = start;
  g.horizon_ = horizon;
  g.steps_ = steps;
  g.dt_ = (horizon - start) / static_cast<double>(steps);
  g.nodes_.resize(static_cast<std::size_t>(steps) + 1);
  for (Index i = 0; i < steps; ++i) {
    g.nodes_[static_cast<std::size_t>(i)] = start + static_cast<double>(i) * g.dt_;
  }
  g.nodes_.back() = horizon;
  return g;
}

}  // namespace bsvie
