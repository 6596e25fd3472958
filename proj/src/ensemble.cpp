#include "bsvie/ensemble.hpp"

#include "bsvie/error.hpp"
#include "bsvie/parallel.hpp"

#include <cmath>
#include <random>
#include <string>

namespace bsvie {

namespace {

Eigen::MatrixXd cumulate(const Eigen::MatrixXd& increments) {
  Eigen::MatrixXd values(increments.rows(), increments.cols() + 1);
  values.col(0).setZero();
  for (Index j = 0; j < increments.cols(); ++j) {
    values.col(j + 1) = values.col(j) + increments.col(j);
  }
  return values;
}

}  // namespace

PathEnsemble::PathEnsemble(TimeGrid grid, Eigen::MatrixXd increments, std::uint64_t seed)
    : grid_(std::move(grid)), seed_(seed) {
  if (increments.cols() != grid_.steps()) {
    throw ShapeError("ensemble: increments have " + std::to_string(increments.cols()) +
                     " columns, grid has " + std::to_string(grid_.steps()) + " steps");
  }
  values_ = std::make_shared<const Eigen::MatrixXd>(cumulate(increments));
  increments_ = std::make_shared<const Eigen::MatrixXd>(std::move(increments));
}

PathEnsemble::PathEnsemble(TimeGrid grid, Eigen::MatrixXd values, Eigen::MatrixXd increments,
                           std::uint64_t seed)
    : grid_(std::move(grid)), seed_(seed) {
  if (increments.cols() != grid_.steps() || values.cols() != grid_.steps() + 1 ||
      values.rows() != increments.rows()) {
    throw ShapeError("ensemble: values/increments do not match the grid");
  }
  values_ = std::make_shared<const Eigen::MatrixXd>(std::move(values));
  increments_ = std::make_shared<const Eigen::MatrixXd>(std::move(increments));
}

PathEnsemble sample_ensemble(const TimeGrid& grid, Index paths, std::uint64_t seed) {
  if (paths < 2) {
    throw ValidationError("ensemble: need at least 2 paths, got " + std::to_string(paths));
  }
  const Index steps = grid.steps();
  const double sd = std::sqrt(grid.dt());
  // Row-major scratch so each path writes one contiguous row.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> draws(paths, steps);
  detail::parallel_chunks(paths, 4096, [&](std::ptrdiff_t begin, std::ptrdiff_t end) {
    for (std::ptrdiff_t p = begin; p < end; ++p) {
      const auto up = static_cast<std::uint64_t>(p);
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(up), static_cast<std::uint32_t>(up >> 32)};
      std::mt19937_64 engine(seq);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Index j = 0; j < steps; ++j) draws(p, j) = sd * normal(engine);
    }
  });
  return PathEnsemble(grid, Eigen::MatrixXd(draws), seed);
}

PathEnsemble coarsen(const PathEnsemble& fine, Index steps, Index paths) {
  const Index n = fine.steps();
  if (steps < 2 || n % steps != 0) {
    throw ValidationError("coarsen: " + std::to_string(steps) + " does not divide " +
                          std::to_string(n) + " steps");
  }
  if (paths < 2 || paths > fine.paths()) {
    throw ValidationError("coarsen: path count must be in [2, " + std::to_string(fine.paths()) + "]");
  }
  const Index factor = n / steps;
  const TimeGrid& g = fine.grid();
  Eigen::MatrixXd inc(paths, steps);
  for (Index j = 0; j < steps; ++j)
    inc.col(j) = fine.increments().block(0, j * factor, paths, factor).rowwise().sum();
  return PathEnsemble(build_grid(g.horizon(), steps, g.start()), std::move(inc), fine.seed());
}

Eigen::VectorXd ito_sum(const Eigen::Ref<const Eigen::MatrixXd>& integrand,
                        const PathEnsemble& ensemble, Index from) {
  const Index steps = ensemble.steps();
  if (integrand.rows() != ensemble.paths() || integrand.cols() != steps) {
    throw ShapeError("ito_sum: integrand must be paths x steps");
  }
  if (from < 0 || from > steps) {
    throw ValidationError("ito_sum: start index " + std::to_string(from) + " out of range");
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(ensemble.paths());
  const auto& dw = ensemble.increments();
  for (Index j = from; j < steps; ++j) {
    acc.array() += integrand.col(j).array() * dw.col(j).array();
  }
  return acc;
}

}  // namespace bsvie
