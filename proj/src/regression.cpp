#include "bsvie/regression.hpp"

#include "bsvie/error.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace bsvie {

namespace {

Eigen::MatrixXd monomials(const Eigen::Ref<const Eigen::VectorXd>& state, double center,
                          double scale, Index size) {
  Eigen::MatrixXd x(state.size(), size);
  x.col(0).setOnes();
  if (size > 1) {
    x.col(1) = (state.array() - center) / scale;
    for (Index k = 2; k < size; ++k) x.col(k) = x.col(k - 1).cwiseProduct(x.col(1));
  }
  return x;
}

}  // namespace

Projector::Projector(const PathEnsemble& driver, BasisSpec basis,
                     std::shared_ptr<const Eigen::MatrixXd> step_weights)
    : driver_(driver), basis_(basis), weights_(std::move(step_weights)) {
  if (basis_.degree < 0) throw ValidationError("basis: degree must be >= 0");
  if (!(basis_.ridge >= 0.0)) throw ValidationError("basis: ridge must be >= 0");
  const Index m = driver_.paths();
  if (basis_.degree + 1 > m) {
    throw ValidationError("basis: " + std::to_string(basis_.degree + 1) +
                          " functions need at least as many paths, got " + std::to_string(m));
  }
  if (weights_ && (weights_->rows() != m || weights_->cols() != driver_.steps())) {
    throw ShapeError("projector: step weights must be paths x steps");
  }
  const Index nodes = driver_.steps() + 1;
  systems_.resize(static_cast<std::size_t>(nodes));
  const double inv_m = 1.0 / static_cast<double>(m);
  for (Index node = 0; node < nodes; ++node) {
    NodeSystem& sys = systems_[static_cast<std::size_t>(node)];
    const auto state = driver_.values().col(node);
    sys.center = state.mean();
    sys.scale = std::sqrt((state.array() - sys.center).square().mean());
    // A state shared by all paths (the deterministic start) only supports constants.
    sys.size = (sys.scale > 0.0) ? basis_.degree + 1 : 1;
    if (sys.size == 1) sys.scale = 1.0;
    const Eigen::MatrixXd x = monomials(state, sys.center, sys.scale, sys.size);
    Eigen::MatrixXd a;
    if (weights_ && node < driver_.steps()) {
      a = inv_m * (x.transpose() * x.cwiseProduct(node_weights(node).replicate(1, sys.size)));
    } else {
      a = inv_m * (x.transpose() * x);
    }
    for (Index k = 1; k < sys.size; ++k) a(k, k) += basis_.ridge;
    sys.qr.compute(a);
    if (sys.qr.rank() < sys.size) {
      throw RegressionError("regression: normal equations are rank deficient at node " +
                                std::to_string(node) + " (degenerate ensemble)",
                            node);
    }
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues();
    sys.condition = sv[0] / sv[sv.size() - 1];
  }
}

const Projector::NodeSystem& Projector::system(Index node) const {
  if (node < 0 || node >= static_cast<Index>(systems_.size())) {
    throw ValidationError("regression: node " + std::to_string(node) + " out of range");
  }
  return systems_[static_cast<std::size_t>(node)];
}

Eigen::VectorXd Projector::node_weights(Index node) const { return weights_->col(node); }

Eigen::MatrixXd Projector::features(Index node) const {
  const NodeSystem& sys = system(node);
  return monomials(driver_.values().col(node), sys.center, sys.scale, sys.size);
}

Eigen::MatrixXd Projector::fit(Index node, const Eigen::Ref<const Eigen::MatrixXd>& features,
                               const Eigen::Ref<const Eigen::MatrixXd>& targets) const {
  const NodeSystem& sys = system(node);
  if (targets.rows() != driver_.paths() || features.rows() != driver_.paths() ||
      features.cols() != sys.size) {
    throw ShapeError("regression: target/feature rows must equal the path count");
  }
  const double inv_m = 1.0 / static_cast<double>(driver_.paths());
  Eigen::MatrixXd rhs;
  if (weights_ && node < driver_.steps()) {
    rhs = inv_m * (features.transpose() *
                   targets.cwiseProduct(node_weights(node).replicate(1, targets.cols())));
  } else {
    rhs = inv_m * (features.transpose() * targets);
  }
  return sys.qr.solve(rhs);
}

CellPoly Projector::cell(Index node, const Eigen::Ref<const Eigen::VectorXd>& coeffs) const {
  const NodeSystem& sys = system(node);
  CellPoly c;
  c.anchor = node;
  c.center = sys.center;
  c.scale = sys.scale;
  c.coeffs = coeffs;
  return c;
}

Eigen::VectorXd Projector::cond_expect(const Eigen::Ref<const Eigen::VectorXd>& target,
                                       Index node) const {
  const Eigen::MatrixXd x = features(node);
  return x * fit(node, x, target);
}

CellPoly Projector::martingale_cell(const Eigen::Ref<const Eigen::VectorXd>& target,
                                    Index node) const {
  if (node < 0 || node >= driver_.steps()) {
    throw ValidationError("martingale_coeff: node " + std::to_string(node) +
                          " has no following increment");
  }
  const Eigen::MatrixXd x = features(node);
  const Eigen::VectorXd centered = target - x * fit(node, x, target);
  const Eigen::VectorXd scaled =
      centered.cwiseProduct(driver_.increments().col(node)) / driver_.grid().dt();
  return cell(node, fit(node, x, scaled));
}

Eigen::VectorXd Projector::martingale_coeff(const Eigen::Ref<const Eigen::VectorXd>& target,
                                            Index node) const {
  const CellPoly c = martingale_cell(target, node);
  return c.evaluate(driver_.values().col(node)).matrix();
}

RegressionReport Projector::report(const Eigen::Ref<const Eigen::VectorXd>& target,
                                   Index node) const {
  const Eigen::MatrixXd x = features(node);
  RegressionReport r;
  r.coefficients = fit(node, x, target);
  r.residual_l2 = std::sqrt((target - x * r.coefficients).squaredNorm() /
                            static_cast<double>(target.size()));
  r.condition = condition(node);
  return r;
}

Eigen::VectorXd cond_expect(const Eigen::Ref<const Eigen::VectorXd>& target,
                            const PathEnsemble& ensemble, Index node, const BasisSpec& basis) {
  return Projector(ensemble, basis).cond_expect(target, node);
}

Eigen::VectorXd martingale_coeff(const Eigen::Ref<const Eigen::VectorXd>& target,
                                 const PathEnsemble& ensemble, Index node,
                                 const BasisSpec& basis) {
  return Projector(ensemble, basis).martingale_coeff(target, node);
}

double at_initial_expect(const Eigen::Ref<const Eigen::VectorXd>& target) {
  if (target.size() == 0) throw ValidationError("at_initial_expect: empty target");
  return target.mean();
}

}  // namespace bsvie
