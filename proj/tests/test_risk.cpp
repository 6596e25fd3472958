#include "bsvie/error.hpp"
#include "bsvie/risk.hpp"

#include <doctest.h>

#include <cmath>

using namespace bsvie;

namespace {

RiskSpec linear_spec(Index n, const char* eta = "0.1", const char* position = "wT") {
  RiskSpec s;
  s.grid = build_grid(1.0, n);
  s.eta = expr::parse(eta);
  s.position = Terminal::parse(position);
  return s;
}

// The linear scheme run by hand for the unit position: for j > i
//   Lambda(i, j) = Lambda(i, j+1) + dt eta_j Y_j,   Lambda(i, N) = 1,
// and the explicit diagonal Y_i = Lambda(i, i+1) + dt eta_i Y_{i+1}.
Eigen::VectorXd hand_discount(const RiskSpec& spec) {
  const TimeGrid& g = spec.grid;
  const Index n = g.steps();
  const double dt = g.dt();
  auto eta = [&](Index j) { return expr::eval(spec.eta, expr::Env{{"s", g[j]}, {"T", g.horizon()}, {"T1", g.start()}}); };
  Eigen::VectorXd y(n + 1);
  y[n] = 1.0;
  for (Index i = n - 1; i >= 0; --i) {
    // Lambda(i, k) for the outer time t_i, swept from k = N down to i + 1.
    double lambda = 1.0;
    for (Index k = n - 1; k > i; --k) lambda += dt * eta(k) * y[k];
    y[i] = lambda + dt * eta(i) * y[i + 1];
  }
  return y;
}

}  // namespace

TEST_SUITE("risk") {

TEST_CASE("discrete discount matches the scheme run by hand") {
  for (const char* eta : {"0.1", "0.3*s + 0.05", "0"}) {
    CAPTURE(eta);
    const RiskSpec spec = linear_spec(16, eta);
    const Eigen::VectorXd d = discrete_discount(spec);
    const Eigen::VectorXd h = hand_discount(spec);
    CHECK((d - h).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("continuous discount is the exponential") {
  const RiskSpec spec = linear_spec(8, "0.1");
  const Eigen::VectorXd d = continuous_discount(spec);
  for (Index i = 0; i <= 8; ++i) CHECK(d[i] == doctest::Approx(std::exp(0.1 * (1.0 - spec.grid[i]))).epsilon(1e-10));
}

TEST_CASE("discrete discount converges at first order") {
  double gap[3];
  int k = 0;
  for (Index n : {16, 32, 64}) {
    const RiskSpec spec = linear_spec(n, "0.5");
    gap[k++] = (discrete_discount(spec) - continuous_discount(spec)).cwiseAbs().maxCoeff();
  }
  CHECK(gap[0] / gap[1] == doctest::Approx(2.0).epsilon(0.1));
  CHECK(gap[1] / gap[2] == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("constant position gives the deterministic discount") {
  const RiskSpec spec = linear_spec(16, "0.2", "1.5");
  const PathEnsemble e = sample_ensemble(spec.grid, 512, 2);
  const RiskRun r = rho(spec, e, {});
  const Eigen::VectorXd d = discrete_discount(spec);
  for (Index i = 0; i <= 16; ++i) CHECK((r.rho.values.col(i).array() + 1.5 * d[i]).abs().maxCoeff() < 1e-12);
}

TEST_CASE("linear axioms hold exactly") {
  const RiskSpec spec = linear_spec(16);
  AxiomPerturbations pert;
  pert.second = Terminal::parse("wT^2 - t");
  const AxiomReport rep = check_axioms(spec, pert, sample_ensemble(spec.grid, 4096, 1), {});
  for (const AxiomResult& a : rep.axioms) {
    CAPTURE(a.name);
    CHECK(a.passed);
  }
  CHECK(rep.find("translation").max_violation < kExactTolerance);
  CHECK(rep.find("past_independence").max_violation == 0.0);
  CHECK(rep.passed());
}

TEST_CASE("abs preset is monotone and statistically sub-additive") {
  RiskSpec spec = linear_spec(16);
  spec.preset = RiskPreset::abs;
  AxiomPerturbations pert;
  pert.second = Terminal::parse("wT^2 - t");
  const AxiomReport rep = check_axioms(spec, pert, sample_ensemble(spec.grid, 8192, 1), {});
  const AxiomResult& mono = rep.find("monotonicity");
  CHECK(mono.passed);
  const AxiomResult& sub = rep.find("subadditivity");
  CHECK(sub.judged_on_rms);
  CHECK(sub.rms_violation < sub.tolerance);
  CHECK_FALSE(rep.find("translation").applicable);
}

TEST_CASE("runs without common random numbers are rejected") {
  const RiskSpec spec = linear_spec(8);
  const RiskRun a = rho(spec, sample_ensemble(spec.grid, 256, 1), {});
  const RiskRun b = rho(spec, sample_ensemble(spec.grid, 256, 2), {});
  const RiskRun c = rho(spec, sample_ensemble(spec.grid, 256, 1), {});
  CHECK_THROWS_AS(require_common_random_numbers(a, b), ValidationError);
  CHECK_NOTHROW(require_common_random_numbers(a, c));
}

TEST_CASE("direct and Girsanov routes agree") {
  RiskSpec spec = linear_spec(16);
  spec.drift = DriftSpec::parse("0.2", "0.1*s");
  const PathEnsemble e = sample_ensemble(spec.grid, 16384, 3);
  const RiskRun direct = rho(spec, e, {});
  spec.route = RiskRoute::girsanov;
  const RiskRun girsanov = rho(spec, e, {});
  const double gap = relative_l2_gap(direct.rho, girsanov.rho);
  MESSAGE("route gap ", gap);
  CHECK(gap < 0.02);
  CHECK(girsanov_selftest(risk_tilt(spec, e)).passed);
}

TEST_CASE("the risk equation rejects random coefficients") {
  RiskSpec spec = linear_spec(8);
  spec.eta = expr::parse("w");
  CHECK_THROWS_AS(risk_problem(spec, RiskRoute::direct), ValidationError);
}

}  // TEST_SUITE
