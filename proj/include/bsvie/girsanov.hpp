#pragma once

#include "bsvie/ensemble.hpp"
#include "bsvie/expr.hpp"
#include "bsvie/solver.hpp"

#include <Eigen/Core>

#include <memory>
#include <string_view>
#include <vector>

namespace bsvie {

/// Deterministic drifts r1(s), r2(s) with r = r1 + r2. Expressions may use
/// s, T1 and T.
struct DriftSpec {
  expr::Expr r1;
  expr::Expr r2;

  static DriftSpec parse(std::string_view r1, std::string_view r2);
  static DriftSpec none() { return parse("0", "0"); }
  DriftSpec negated() const;

  double r1_at(double s, const TimeGrid& grid) const;
  double r2_at(double s, const TimeGrid& grid) const;
  double at(double s, const TimeGrid& grid) const { return r1_at(s, grid) + r2_at(s, grid); }
  bool is_zero() const;
};

/// Density exponent convention. `standard` is exp(-int r dW - 1/2 int r^2),
/// under which W + int r is Brownian; `printed` flips the sign of the
/// stochastic integral and exists to show that the self-test detects it.
enum class DensitySign { standard, printed };

/// A measure change that turns W~ = W + int_0^. r(s) ds into a Brownian
/// motion. The sampled paths stay the P-Brownian W, so runs on the tilted
/// ensemble share random numbers with runs on the original one.
struct TiltedEnsemble {
  PathEnsemble base;              // W under P
  PathEnsemble tilde;             // W~ = W + R
  Eigen::VectorXd drift_integral; // R(t_i), trapezoidal
  Eigen::VectorXd step_drift;     // R(t_{j+1}) - R(t_j)
  double drift_energy = 0.0;      // int_0^T r^2 ds, trapezoidal
  std::shared_ptr<const Eigen::MatrixXd> step_weights;  // one-step densities, M x N
  Eigen::VectorXd weights;        // dP~/dP per path
  DensitySign sign = DensitySign::standard;

  /// Regressions on W~ under the weighted measure; Psi and g read W.
  Driver driver() const;
};

TiltedEnsemble tilt(const PathEnsemble& ensemble, const DriftSpec& drift,
                    DensitySign sign = DensitySign::standard);

struct SelftestReport {
  double threshold = 4.0;              // family-wise level in sigma
  double per_test_threshold = 4.0;     // Bonferroni level of each statistic
  double weight_mean = 1.0;
  double weight_z = 0.0;               // (mean weight - 1) / stderr
  std::vector<double> mean_z;          // per step: weighted mean of dW~ / stderr
  std::vector<double> variance_z;      // per step: (weighted mean of dW~^2 - dt) / stderr
  double max_mean_z = 0.0;
  double max_variance_z = 0.0;
  bool passed = true;
};

/// Weighted first and second moments of the W~ increments against (0, dt),
/// and the mean weight against 1. The 2N + 1 z-scores are tested jointly:
/// the run fails with the probability of one |z| > threshold under the null.
SelftestReport girsanov_selftest(const TiltedEnsemble& tilted, double threshold = 4.0);

}  // namespace bsvie
