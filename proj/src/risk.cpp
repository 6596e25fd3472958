#include "bsvie/risk.hpp"

#include "bsvie/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace bsvie {

using expr::Var;

namespace {

constexpr expr::VarMask kEtaVars = expr::mask_of({Var::s, Var::T1, Var::T});
constexpr expr::VarMask kRiskGeneratorVars =
    expr::mask_of({Var::t, Var::s, Var::y, Var::T1, Var::T});

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string wrap(const expr::Expr& e) { return "(" + expr::print(e) + ")"; }

double eta_at(const RiskSpec& spec, double s) {
  expr::Env env;
  env.bind(Var::s, s).bind(Var::T1, spec.grid.start()).bind(Var::T, spec.grid.horizon());
  return expr::eval(spec.eta, env);
}

Terminal negated(const Terminal& psi) {
  if (psi.expression()) {
    return Terminal::from_expr(expr::parse("-" + wrap(*psi.expression())));
  }
  return Terminal::from_function([psi](const TerminalArgs& a) -> Eigen::ArrayXd { return -psi(a); },
                                 "-(" + psi.label() + ")");
}

Terminal shifted(const Terminal& psi, double c) {
  return Terminal::from_function(
      [psi, c](const TerminalArgs& a) -> Eigen::ArrayXd { return psi(a) + c; },
      psi.label() + " + " + fmt(c));
}

Terminal scaled(const Terminal& psi, double lambda) {
  return Terminal::from_function(
      [psi, lambda](const TerminalArgs& a) -> Eigen::ArrayXd { return lambda * psi(a); },
      fmt(lambda) + " * (" + psi.label() + ")");
}

Terminal summed(const Terminal& a, const Terminal& b) {
  return Terminal::from_function(
      [a, b](const TerminalArgs& args) -> Eigen::ArrayXd { return a(args) + b(args); },
      a.label() + " + " + b.label());
}

// psi plus a bump on the nodes before `pivot` only.
Terminal edited_before(const Terminal& psi, Index pivot) {
  return Terminal::from_function(
      [psi, pivot](const TerminalArgs& a) -> Eigen::ArrayXd {
        Eigen::ArrayXd out = psi(a);
        if (a.node < pivot) out += 1.0 + a.wt.square();
        return out;
      },
      psi.label() + " edited before node " + std::to_string(pivot));
}

RiskSpec with_position(const RiskSpec& spec, Terminal psi) {
  RiskSpec out = spec;
  out.position = std::move(psi);
  return out;
}

std::vector<double> quantiles(std::vector<double> v) {
  if (v.empty()) return {0.0, 0.0, 0.0, 0.0};
  std::sort(v.begin(), v.end());
  auto at = [&v](double q) {
    const auto k = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
    return v[k];
  };
  return {at(0.5), at(0.9), at(0.99), v.back()};
}

// Violations are max(0, diff) when one-sided and |diff| otherwise, over nodes >= first_node.
enum class Judge { max, rms };

AxiomResult compare(const std::string& name, const Eigen::MatrixXd& diff, bool one_sided,
                    double tolerance, Judge judge, Index first_node = 0) {
  AxiomResult r;
  r.name = name;
  r.tolerance = tolerance;
  std::vector<double> v;
  const Eigen::MatrixXd block = diff.rightCols(diff.cols() - first_node);
  v.reserve(static_cast<std::size_t>(block.size()));
  for (Index k = 0; k < block.size(); ++k) {
    const double d = block.data()[k];
    v.push_back(one_sided ? std::max(d, 0.0) : std::abs(d));
  }
  r.samples = block.size();
  r.max_violation = v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
  // Same quadrature as rms_norm: nodes before the horizon, equal weights.
  const Index last = std::max<Index>(diff.cols() - 1, first_node + 1);
  double acc = 0.0;
  Index count = 0;
  for (Index j = first_node; j < last && j < diff.cols(); ++j) {
    for (Index p = 0; p < diff.rows(); ++p) {
      const double d = diff(p, j);
      const double x = one_sided ? std::max(d, 0.0) : std::abs(d);
      acc += x * x;
      ++count;
    }
  }
  r.rms_violation = count > 0 ? std::sqrt(acc / static_cast<double>(count)) : 0.0;
  r.judged_on_rms = judge == Judge::rms;
  r.quantiles = quantiles(std::move(v));
  r.passed = (judge == Judge::rms ? r.rms_violation : r.max_violation) <= tolerance;
  return r;
}

}  // namespace

expr::Expr risk_generator_expr(const RiskSpec& spec) {
  expr::require_vars(spec.eta, kEtaVars, "risk eta");
  switch (spec.preset) {
    case RiskPreset::linear: return expr::parse(wrap(spec.eta) + " * y");
    case RiskPreset::abs: return expr::parse(wrap(spec.eta) + " * abs(y)");
    case RiskPreset::custom:
      if (!spec.f) throw ValidationError("risk: the custom preset needs risk.f");
      expr::require_vars(*spec.f, kRiskGeneratorVars, "risk f");
      return *spec.f;
  }
  throw ValidationError("risk: unknown preset");
}

ProblemSpec risk_problem(const RiskSpec& spec, RiskRoute route) {
  const expr::Expr f = risk_generator_expr(spec);
  std::string text = wrap(f);
  if (route == RiskRoute::direct && !spec.drift.is_zero()) {
    text += " + " + wrap(spec.drift.r1) + " * z + " + wrap(spec.drift.r2) + " * zeta";
  }
  ProblemSpec p;
  p.grid = spec.grid;
  p.generator = Generator::parse(text);
  p.terminal = negated(spec.position);
  p.lipschitz = spec.lipschitz;
  p.label = "risk";
  return p;
}

namespace {

RunFingerprint fingerprint_of(const RiskSpec& spec, const PathEnsemble& ens,
                              const SolverConfig& config, RiskRoute route) {
  RunFingerprint fp;
  fp.seed = ens.seed();
  fp.paths = ens.paths();
  fp.steps = ens.steps();
  fp.start = ens.grid().start();
  fp.horizon = ens.grid().horizon();
  fp.degree = config.basis.degree;
  fp.ridge = config.basis.ridge;
  fp.route = route;
  fp.generator = expr::print(risk_generator_expr(spec));
  fp.drift = expr::print(spec.drift.r1) + ";" + expr::print(spec.drift.r2);
  return fp;
}

SolverConfig s_config(const SolverConfig& config) {
  SolverConfig c = config;
  c.mode = SolveMode::s_solution;
  return c;
}

}  // namespace

TiltedEnsemble risk_tilt(const RiskSpec& spec, const PathEnsemble& ensemble) {
  return tilt(ensemble, spec.drift.negated());
}

RiskRun rho(const RiskSpec& spec, const PathEnsemble& ensemble, const SolverConfig& config) {
  if (spec.route == RiskRoute::girsanov) return rho(spec, risk_tilt(spec, ensemble), config);
  RiskRun run;
  run.report = solve_s(risk_problem(spec, RiskRoute::direct), Driver(ensemble), s_config(config));
  run.rho = run.report.y;
  run.fingerprint = fingerprint_of(spec, ensemble, config, RiskRoute::direct);
  return run;
}

RiskRun rho(const RiskSpec& spec, const TiltedEnsemble& tilted, const SolverConfig& config) {
  RiskRun run;
  run.report =
      solve_s(risk_problem(spec, RiskRoute::girsanov), tilted.driver(), s_config(config));
  run.rho = run.report.y;
  run.fingerprint = fingerprint_of(spec, tilted.base, config, RiskRoute::girsanov);
  return run;
}

void require_common_random_numbers(const RiskRun& a, const RiskRun& b) {
  if (!(a.fingerprint == b.fingerprint)) {
    throw ValidationError(
        "axioms: compared runs differ in seed, grid, paths, route or solver config; "
        "the comparison needs common random numbers");
  }
}

double relative_l2_gap(const AdaptedField& a, const AdaptedField& b) {
  if (!(a.grid == b.grid) || a.paths() != b.paths()) throw ShapeError("gap: shape mismatch");
  const Index n = a.grid.steps();
  const double num = (a.values - b.values).leftCols(n).squaredNorm();
  const double den = a.values.leftCols(n).squaredNorm();
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

double rms_norm(const AdaptedField& rho) { return std::sqrt(y_l2(rho) / rho.grid.span()); }

Eigen::VectorXd discrete_discount(const RiskSpec& spec) {
  const TimeGrid& g = spec.grid;
  const Index n = g.steps();
  const double dt = g.dt();
  Eigen::VectorXd d(n + 1);
  d[n] = 1.0;
  double tail = 0.0;  // sum_{j > i, j < N} eta_j D_j
  for (Index i = n - 1; i >= 0; --i) {
    const double eta = eta_at(spec, g[i]);
    d[i] = 1.0 + dt * (eta * d[i + 1] + tail);
    tail += eta * d[i];
  }
  return d;
}

Eigen::VectorXd continuous_discount(const RiskSpec& spec) {
  const TimeGrid& g = spec.grid;
  const Index n = g.steps();
  constexpr int kSub = 64;
  const double h = g.dt() / kSub;
  Eigen::VectorXd d(n + 1);
  d[n] = 1.0;
  double integral = 0.0;
  for (Index i = n - 1; i >= 0; --i) {
    for (int k = 0; k < kSub; ++k) {
      const double a = g[i] + k * h;
      integral += 0.5 * h * (eta_at(spec, a) + eta_at(spec, a + h));
    }
    d[i] = std::exp(integral);
  }
  return d;
}

bool AxiomReport::passed() const {
  return std::all_of(axioms.begin(), axioms.end(), [](const AxiomResult& a) { return a.passed; });
}

const AxiomResult& AxiomReport::find(const std::string& name) const {
  for (const auto& a : axioms)
    if (a.name == name) return a;
  throw ValidationError("axiom report: no axiom named '" + name + "'");
}

AxiomReport check_axioms(const RiskSpec& spec, const AxiomPerturbations& pert,
                         const PathEnsemble& ensemble, const SolverConfig& config) {
  if (!(pert.lambda > 0.0)) throw ValidationError("axioms: lambda must be > 0");
  if (!(pert.shift >= 0.0)) throw ValidationError("axioms: shift must be >= 0");
  const TimeGrid& g = spec.grid;
  const Index n = g.steps();
  if (spec.preset == RiskPreset::abs) {
    for (Index i = 0; i <= n; ++i)
      if (eta_at(spec, g[i]) < 0.0) {
        throw ValidationError("axioms: the abs preset needs eta >= 0 for sub-additivity");
      }
  }
  const Index pivot = pert.pivot < 0 ? n / 2 : pert.pivot;
  if (pivot > n) throw ValidationError("axioms: pivot outside the grid");

  // One tilt shared by every girsanov run.
  std::optional<TiltedEnsemble> tilted;
  if (spec.route == RiskRoute::girsanov) tilted = tilt(ensemble, spec.drift);
  auto run = [&](const Terminal& psi) {
    const RiskSpec s = with_position(spec, psi);
    return tilted ? rho(s, *tilted, config) : rho(s, ensemble, config);
  };

  const RiskRun base = run(spec.position);
  AxiomReport rep;
  rep.fingerprint = base.fingerprint;
  rep.rho_norm = rms_norm(base.rho);
  const double statistical = kAxiomRelativeTolerance * rep.rho_norm;
  const bool linear = spec.preset == RiskPreset::linear;
  const bool homogeneous = spec.preset != RiskPreset::custom;

  {
    const RiskRun edited = run(edited_before(spec.position, pivot));
    require_common_random_numbers(base, edited);
    AxiomResult r = compare("past_independence", edited.rho.values - base.rho.values, false, 0.0,
                            Judge::max, pivot);
    r.note = "psi edited on nodes < " + std::to_string(pivot) + "; rows >= pivot compared bitwise";
    rep.axioms.push_back(std::move(r));
  }
  {
    const RiskRun bar = run(shifted(spec.position, pert.shift));
    require_common_random_numbers(base, bar);
    AxiomResult r = compare("monotonicity", bar.rho.values - base.rho.values, true, statistical,
                            Judge::rms);
    r.note = "psi_bar = psi + " + fmt(pert.shift) + "; violation = max(0, rho_bar - rho)";
    rep.axioms.push_back(std::move(r));
  }
  {
    const Eigen::VectorXd discrete = discrete_discount(spec);
    const Eigen::VectorXd continuous = continuous_discount(spec);
    rep.discount_gap = ((discrete - continuous).array() / continuous.array()).abs().maxCoeff();
    if (linear) {
      const RiskRun moved = run(shifted(spec.position, pert.c));
      require_common_random_numbers(base, moved);
      Eigen::MatrixXd defect = moved.rho.values - base.rho.values;
      defect.rowwise() += pert.c * discrete.transpose();
      AxiomResult r = compare("translation", defect, false, kExactTolerance, Judge::max);
      r.note = "rho(psi + c) - rho(psi) + c * D(t) with the discrete discount D";
      rep.axioms.push_back(std::move(r));
    } else {
      AxiomResult r;
      r.name = "translation";
      r.applicable = false;
      r.note = "translation with discounting needs the linear preset";
      rep.axioms.push_back(std::move(r));
    }
  }
  {
    const RiskRun big = run(scaled(spec.position, pert.lambda));
    require_common_random_numbers(base, big);
    AxiomResult r = compare("homogeneity", big.rho.values - pert.lambda * base.rho.values, false,
                            linear ? kExactTolerance : statistical,
                            linear ? Judge::max : Judge::rms);
    if (!homogeneous) r.note = "custom generator: homogeneity is not implied";
    rep.axioms.push_back(std::move(r));
  }
  {
    const RiskRun second = run(pert.second);
    const RiskRun both = run(summed(spec.position, pert.second));
    require_common_random_numbers(base, second);
    require_common_random_numbers(base, both);
    const Eigen::MatrixXd gap = both.rho.values - base.rho.values - second.rho.values;
    AxiomResult r = compare("subadditivity", gap, true, statistical, Judge::rms);
    if (linear) {
      const double eq = gap.cwiseAbs().maxCoeff();
      r.note = "linear generator: equality expected, max |defect| = " + fmt(eq);
      r.passed = r.passed && eq <= kExactTolerance;
    }
    rep.axioms.push_back(std::move(r));
  }
  return rep;
}

}  // namespace bsvie
