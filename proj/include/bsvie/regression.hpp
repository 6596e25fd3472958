#pragma once

#include "bsvie/ensemble.hpp"
#include "bsvie/fields.hpp"

#include <Eigen/Core>
#include <Eigen/QR>

#include <memory>
#include <vector>

namespace bsvie {

/// Polynomial basis {1, x, ..., x^degree} in the standardized Brownian state
/// x = (W(t_i) - mean) / sd at the conditioning node.
struct BasisSpec {
  enum class State { brownian_value };

  int degree = 3;
  double ridge = 1e-10;  // applied to the non-constant coefficients only
  State state = State::brownian_value;
};

struct RegressionReport {
  Eigen::VectorXd coefficients;
  double residual_l2 = 0.0;  // sqrt(mean (target - fitted)^2)
  double condition = 1.0;    // of the normal matrix
};

/// Least-squares projections onto the basis at each node of an ensemble.
///
/// Normal matrices are assembled and factored once per node. With
/// `step_weights` (M x N, one-step likelihood ratios of a measure change) the
/// projection at node j is the weighted one, which estimates the conditional
/// expectation under the new measure for targets measurable at t_{j+1}.
class Projector {
 public:
  explicit Projector(const PathEnsemble& driver, BasisSpec basis = {},
                     std::shared_ptr<const Eigen::MatrixXd> step_weights = nullptr);

  const PathEnsemble& driver() const noexcept { return driver_; }
  const BasisSpec& basis() const noexcept { return basis_; }
  bool weighted() const noexcept { return static_cast<bool>(weights_); }
  Index basis_size(Index node) const { return system(node).size; }
  double condition(Index node) const { return system(node).condition; }

  /// Standardized monomials at `node`, M x basis_size(node).
  Eigen::MatrixXd features(Index node) const;

  /// Coefficients (k x c) of the projection of every column of `targets`.
  Eigen::MatrixXd fit(Index node, const Eigen::Ref<const Eigen::MatrixXd>& features,
                      const Eigen::Ref<const Eigen::MatrixXd>& targets) const;

  /// Wraps a coefficient vector produced by fit() as a cell anchored at `node`.
  CellPoly cell(Index node, const Eigen::Ref<const Eigen::VectorXd>& coeffs) const;

  /// Fitted values of the projection of `target` at `node`.
  Eigen::VectorXd cond_expect(const Eigen::Ref<const Eigen::VectorXd>& target, Index node) const;

  /// Regression estimate of the integrand at t_j in the martingale
  /// representation of `target`: the projection of
  /// (target - cond_expect(target, j)) * dW_j / dt onto the basis at j.
  CellPoly martingale_cell(const Eigen::Ref<const Eigen::VectorXd>& target, Index node) const;
  Eigen::VectorXd martingale_coeff(const Eigen::Ref<const Eigen::VectorXd>& target,
                                   Index node) const;

  RegressionReport report(const Eigen::Ref<const Eigen::VectorXd>& target, Index node) const;

 private:
  struct NodeSystem {
    Index size = 1;
    double center = 0.0;
    double scale = 1.0;
    double condition = 1.0;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
  };

  const NodeSystem& system(Index node) const;
  Eigen::VectorXd node_weights(Index node) const;

  PathEnsemble driver_;
  BasisSpec basis_;
  std::shared_ptr<const Eigen::MatrixXd> weights_;
  std::vector<NodeSystem> systems_;
};

/// Free-function forms; each builds a Projector on the fly.
Eigen::VectorXd cond_expect(const Eigen::Ref<const Eigen::VectorXd>& target,
                            const PathEnsemble& ensemble, Index node, const BasisSpec& basis = {});
Eigen::VectorXd martingale_coeff(const Eigen::Ref<const Eigen::VectorXd>& target,
                                 const PathEnsemble& ensemble, Index node,
                                 const BasisSpec& basis = {});
/// E[target | F_0] for a deterministic start: the sample mean.
double at_initial_expect(const Eigen::Ref<const Eigen::VectorXd>& target);

}  // namespace bsvie
