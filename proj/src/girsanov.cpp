#include "bsvie/girsanov.hpp"

#include "bsvie/error.hpp"

#include <cmath>
#include <string>

namespace bsvie {

using expr::Var;

namespace {

constexpr expr::VarMask kDriftVars = expr::mask_of({Var::s, Var::T1, Var::T});

double eval_drift(const expr::Expr& e, double s, const TimeGrid& grid) {
  expr::Env env;
  env.bind(Var::s, s).bind(Var::T1, grid.start()).bind(Var::T, grid.horizon());
  return expr::eval(e, env);
}

// Self-normalized weighted mean and its standard error.
std::pair<double, double> weighted_mean(const Eigen::ArrayXd& x, const Eigen::ArrayXd& w) {
  const double total = w.sum();
  const double mean = (w * x).sum() / total;
  const double se = std::sqrt((w * (x - mean)).square().sum()) / total;
  return {mean, se};
}

}  // namespace

DriftSpec DriftSpec::parse(std::string_view r1, std::string_view r2) {
  DriftSpec d{expr::parse(r1), expr::parse(r2)};
  expr::require_vars(d.r1, kDriftVars, "drift r1");
  expr::require_vars(d.r2, kDriftVars, "drift r2");
  return d;
}

DriftSpec DriftSpec::negated() const {
  return DriftSpec{expr::parse("-(" + expr::print(r1) + ")"),
                   expr::parse("-(" + expr::print(r2) + ")")};
}

double DriftSpec::r1_at(double s, const TimeGrid& grid) const { return eval_drift(r1, s, grid); }
double DriftSpec::r2_at(double s, const TimeGrid& grid) const { return eval_drift(r2, s, grid); }

bool DriftSpec::is_zero() const {
  auto zero = [](const expr::Expr& e) {
    return e.free_vars() == 0 && expr::eval(e, expr::Env{}) == 0.0;
  };
  return zero(r1) && zero(r2);
}

Driver TiltedEnsemble::driver() const {
  Driver d(tilde);
  d.weights = step_weights;
  d.observed = base.shared_values();
  return d;
}

TiltedEnsemble tilt(const PathEnsemble& ensemble, const DriftSpec& drift, DensitySign sign) {
  const TimeGrid& grid = ensemble.grid();
  const Index n = grid.steps();
  const Index m = ensemble.paths();
  const double dt = grid.dt();

  Eigen::VectorXd r(n + 1);
  for (Index i = 0; i <= n; ++i) r[i] = drift.at(grid[i], grid);
  if (!r.allFinite()) throw ValidationError("tilt: drift is not finite on the grid");

  TiltedEnsemble out;
  out.base = ensemble;
  out.sign = sign;
  out.step_drift = 0.5 * dt * (r.head(n) + r.tail(n));
  out.drift_integral = Eigen::VectorXd::Zero(n + 1);
  for (Index j = 0; j < n; ++j) out.drift_integral[j + 1] = out.drift_integral[j] + out.step_drift[j];
  out.drift_energy = 0.5 * dt * (r.head(n).squaredNorm() + r.tail(n).squaredNorm());
  if (!std::isfinite(out.drift_energy) || !out.drift_integral.allFinite()) {
    throw ValidationError("tilt: drift quadrature diverges");
  }

  const Eigen::MatrixXd& dw = ensemble.increments();
  Eigen::MatrixXd tilde_dw = dw;
  tilde_dw.rowwise() += out.step_drift.transpose();
  out.tilde = PathEnsemble(grid, std::move(tilde_dw), ensemble.seed());

  // theta_j = step_drift_j / dt is the drift rate over step j; the one-step
  // density exp(-theta dW - theta^2 dt / 2) makes dW + theta dt centered.
  const double direction = sign == DensitySign::standard ? -1.0 : 1.0;
  auto weights = std::make_shared<Eigen::MatrixXd>(m, n);
  Eigen::ArrayXd log_total = Eigen::ArrayXd::Zero(m);
  for (Index j = 0; j < n; ++j) {
    const double theta = out.step_drift[j] / dt;
    const Eigen::ArrayXd log_step = direction * theta * dw.col(j).array() - 0.5 * theta * theta * dt;
    weights->col(j) = log_step.exp().matrix();
    log_total += log_step;
  }
  out.weights = log_total.exp().matrix();
  out.step_weights = std::move(weights);
  return out;
}

SelftestReport girsanov_selftest(const TiltedEnsemble& tilted, double threshold) {
  SelftestReport rep;
  rep.threshold = threshold;
  const Eigen::ArrayXd w = tilted.weights.array();
  const double m = static_cast<double>(w.size());
  rep.weight_mean = w.mean();
  const double weight_sd = std::sqrt((w - rep.weight_mean).square().sum() / (m - 1.0));
  rep.weight_z = weight_sd > 0.0 ? (rep.weight_mean - 1.0) / (weight_sd / std::sqrt(m)) : 0.0;

  const double dt = tilted.tilde.grid().dt();
  const Eigen::MatrixXd& dw = tilted.tilde.increments();
  for (Index j = 0; j < dw.cols(); ++j) {
    const Eigen::ArrayXd x = dw.col(j).array();
    const auto [mean, mean_se] = weighted_mean(x, w);
    const auto [second, second_se] = weighted_mean(x.square(), w);
    rep.mean_z.push_back(mean / mean_se);
    rep.variance_z.push_back((second - dt) / second_se);
    rep.max_mean_z = std::max(rep.max_mean_z, std::abs(rep.mean_z.back()));
    rep.max_variance_z = std::max(rep.max_variance_z, std::abs(rep.variance_z.back()));
  }
  // Bonferroni over the 2N + 1 statistics: each one is held to the level
  // whose family-wise false-alarm rate equals a single two-sided test at
  // `threshold` sigma.
  const double family = static_cast<double>(2 * dw.cols() + 1);
  const double alpha = std::erfc(threshold / std::sqrt(2.0)) / family;
  double lo = threshold;
  double hi = threshold + 10.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (std::erfc(mid / std::sqrt(2.0)) > alpha ? lo : hi) = mid;
  }
  rep.per_test_threshold = hi;
  rep.passed = std::abs(rep.weight_z) <= hi && rep.max_mean_z <= hi && rep.max_variance_z <= hi;
  return rep;
}

}  // namespace bsvie
