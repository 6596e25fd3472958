// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria (capped at 255).

#include "parser_golden.hpp"

#include "bsvie/analytic.hpp"
#include "bsvie/girsanov.hpp"
#include "bsvie/risk.hpp"
#include "bsvie/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

using namespace bsvie;

namespace {

constexpr Index kN = 64;
constexpr Index kM = 65536;
constexpr std::uint64_t kSeed = 2;
constexpr std::uint64_t kBaselineSeed = 1;

// Y error of eq43 at (64, 65536, degree 3, seed 1), pinned from the first run.
constexpr double kBaselineY = 0.00352;

int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s %2d %s | %s\n", pass ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
}

void info(const std::string& detail) {
  std::printf("INFO    %s\n", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const std::vector<Level> kLevels = {{16, kM}, {32, kM}, {64, kM}};

bool decreasing(const std::vector<ConvergenceRow>& rows, double ErrorReport::*field) {
  for (std::size_t k = 1; k < rows.size(); ++k)
    if (!(rows[k].errors.*field <= 1.10 * rows[k - 1].errors.*field)) return false;
  return true;
}

std::string errors_line(const std::vector<ConvergenceRow>& rows, double ErrorReport::*field) {
  std::string s;
  for (const auto& r : rows) s += (s.empty() ? "" : "/") + fmt("%.4g", r.errors.*field);
  return s;
}

// Criteria 1 and 2.
void s_solution_case(int id, CaseId cid) {
  const ReferenceCase c = reference_case(cid);
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = convergence_study(c, kLevels, {}, kSeed);
  const double secs = seconds_since(t0);
  const ErrorReport& fine = rows.back().errors;
  const bool pass = fine.y <= 0.05 && fine.z_upper <= 0.10 && decreasing(rows, &ErrorReport::y) &&
                    decreasing(rows, &ErrorReport::z_upper) && secs <= 300.0;
  report(id, pass, std::string(case_name(cid)) + " S-solution (N=64, M=65536, seed 2)",
         fmt("y %s (<=0.05, each <=1.10x previous), z_upper %s (<=0.10), %.1fs (<=300s)",
             errors_line(rows, &ErrorReport::y).c_str(), errors_line(rows, &ErrorReport::z_upper).c_str(),
             secs));
}

void criterion_3() {
  SolverConfig m;
  m.mode = SolveMode::m_solution;
  bool pass = true;
  std::string detail;
  for (CaseId cid : {CaseId::eq43, CaseId::eq44}) {
    const ReferenceCase c = reference_case(cid);
    const ProblemSpec p = case_problem(c, kN);
    const PathEnsemble e = sample_ensemble(p.grid, kM, kSeed);
    const ErrorReport err = error_metrics(solve(p, Driver(e), m), reference_fields(c, e));
    pass = pass && err.z_lower <= 0.10;
    detail += fmt("%s z_lower %.4g ", std::string(case_name(cid)).c_str(), err.z_lower);
  }
  report(3, pass, "M-solution lower triangle", detail + "(<=0.10)");
}

// Criteria 4, 5 and 6 share the N=64 solves.
void criteria_4_5_6() {
  const ReferenceCase c = reference_case(CaseId::eq43);
  const ProblemSpec p = case_problem(c, kN);
  const PathEnsemble e = sample_ensemble(p.grid, kM, kSeed);
  SolverConfig m;
  m.mode = SolveMode::m_solution;
  const SolveReport s = solve(p, Driver(e), {});
  const SolveReport r = solve(p, Driver(e), m);

  bool same = s.y.values == r.y.values;
  Index cells = 0;
  for (Index i = 0; i < kN; ++i)
    for (Index j = i; j < kN; ++j, ++cells) same = same && (s.z.values(i, j) == r.z.values(i, j)).all();
  report(4, same, "S and M solutions coincide on the upper triangle",
         fmt("Y and %ld upper cells compared bitwise", static_cast<long>(cells)));

  double worst = 0.0;
  for (SolveMode mode : {SolveMode::s_solution, SolveMode::m_solution}) {
    const ReferenceCase zc = reference_case(CaseId::zero);
    const ProblemSpec zp = case_problem(zc, kN);
    SolverConfig cfg;
    cfg.mode = mode;
    const SolveReport z = solve(zp, Driver(sample_ensemble(zp.grid, kM, kSeed)), cfg);
    worst = std::max(worst, z.y.values.cwiseAbs().maxCoeff());
    for (Index i = 0; i <= kN; ++i)
      for (Index j = 0; j <= kN; ++j)
        if (z.z.defined(i, j)) worst = std::max(worst, z.z.values(i, j).abs().maxCoeff());
  }
  report(5, worst == 0.0, "zero case", fmt("max |Y|, |Z| over S and M solves = %g (==0)", worst));

  double asym = 0.0;
  bool all_defined = true;
  for (Index i = 0; i < kN; ++i)
    for (Index j = 0; j < kN; ++j) {
      if (!s.z.defined(i, j) || !s.z.defined(j, i)) {
        all_defined = false;
        continue;
      }
      asym = std::max(asym, (s.z.values(i, j) - s.z.values(j, i)).abs().maxCoeff());
    }
  report(6, all_defined && asym == 0.0, "S-solution symmetry",
         fmt("max |Z(i,j) - Z(j,i)| over paths and %ldx%ld cells = %g (==0)", static_cast<long>(kN),
             static_cast<long>(kN), asym));

  const ErrorReport base =
      error_metrics(solve(p, Driver(sample_ensemble(p.grid, kM, kBaselineSeed)), {}),
                    reference_fields(c, sample_ensemble(p.grid, kM, kBaselineSeed)));
  info(fmt("eq43 seed-1 baseline: y %.5g (pinned <= %.4g: %s), z_upper %.5g", base.y, kBaselineY,
           base.y <= kBaselineY ? "ok" : "REGRESSED", base.z_upper));
}

void criterion_7() {
  const ReferenceCase c = reference_case(CaseId::eq43);
  const ProblemSpec p = case_problem(c, kN);
  const PathEnsemble e = sample_ensemble(p.grid, kM, kSeed);
  const SolveReport d = solve(p, Driver(e), {});
  SolverConfig cfg;
  cfg.picard = true;
  cfg.max_iter = 50;
  cfg.tol = 1e-6;
  const SolveReport r = solve(p, Driver(e), cfg);
  const double dist = std::sqrt((y_distance_sq(d.y, r.y) + z_distance_sq(d.z, r.z, CellSet::upper)) /
                                (y_l2(d.y) + z_l2(d.z, CellSet::upper)));
  const double max_ratio = r.contraction_ratios.empty()
                               ? 0.0
                               : *std::max_element(r.contraction_ratios.begin(), r.contraction_ratios.end());
  const bool pass = r.converged && r.iterations <= 50 && dist <= 1e-6 && max_ratio < 1.0;
  report(7, pass, "Picard iteration on eq43",
         fmt("%d iterations (<=50), distance to diagonal mode %.3g (<=1e-6), max ratio %.3g (<1)",
             r.iterations, dist, max_ratio));
}

RiskSpec risk_spec(Index n, RiskPreset preset, const char* position) {
  RiskSpec s;
  s.grid = build_grid(1.0, n);
  s.preset = preset;
  s.eta = expr::parse("0.1");
  s.position = Terminal::parse(position);
  return s;
}

void criterion_8() {
  const RiskSpec spec = risk_spec(kN, RiskPreset::linear, "wT");
  AxiomPerturbations pert;
  pert.c = 1.0;
  pert.lambda = 2.0;
  pert.second = Terminal::parse("wT^2 - t");
  const AxiomReport rep = check_axioms(spec, pert, sample_ensemble(spec.grid, kM, kSeed), {});
  const AxiomResult& tr = rep.find("translation");
  const AxiomResult& ho = rep.find("homogeneity");
  const bool pass = tr.max_violation <= 1e-10 && ho.max_violation <= 1e-10;
  report(8, pass, "linear risk translation and homogeneity",
         fmt("translation %.3g, homogeneity %.3g (<=1e-10)", tr.max_violation, ho.max_violation));
}

void criterion_9() {
  const PathEnsemble fine = sample_ensemble(build_grid(1.0, kN), kM, kSeed);
  AxiomPerturbations pert;
  pert.shift = 0.5;
  pert.second = Terminal::parse("wT^2 - t");
  std::vector<double> mono, sub, norm;
  for (Index n : {16, 32, 64}) {
    const RiskSpec spec = risk_spec(n, RiskPreset::abs, "wT + sin(t)");
    const AxiomReport rep = check_axioms(spec, pert, n == kN ? fine : coarsen(fine, n, kM), {});
    mono.push_back(rep.find("monotonicity").rms_violation);
    sub.push_back(rep.find("subadditivity").rms_violation);
    norm.push_back(rep.rho_norm);
  }
  const double rho = norm.back();
  const bool small = mono.back() <= 0.02 * rho && sub.back() <= 0.02 * rho;
  auto falls = [](const std::vector<double>& v) {
    for (std::size_t k = 1; k < v.size(); ++k)
      if (v[k] > v[k - 1]) return false;
    return true;
  };
  const bool refine = falls(mono) && falls(sub);
  report(9, small && refine, "risk monotonicity and sub-additivity (|y| preset, shift 0.5)",
         fmt("rms violation / ||rho||: monotonicity %.3g/%.3g/%.3g, sub-additivity %.3g/%.3g/%.3g over "
             "N=16/32/64 (<=0.02 at N=64: %s; non-increasing: %s)",
             mono[0] / norm[0], mono[1] / norm[1], mono[2] / norm[2], sub[0] / norm[0], sub[1] / norm[1],
             sub[2] / norm[2], small ? "yes" : "no", refine ? "yes" : "no"));
}

void criterion_10() {
  double worst = 0.0;
  std::string detail;
  for (RiskPreset preset : {RiskPreset::linear, RiskPreset::abs}) {
    RiskSpec spec = risk_spec(kN, preset, "wT + sin(t)");
    spec.drift = DriftSpec::parse("0.3", "0.2*s");
    const PathEnsemble e = sample_ensemble(spec.grid, kM, kSeed);
    const RiskRun direct = rho(spec, e, {});
    spec.route = RiskRoute::girsanov;
    const RiskRun tilted = rho(spec, e, {});
    const double gap = relative_l2_gap(direct.rho, tilted.rho);
    worst = std::max(worst, gap);
    detail += fmt("%s gap %.3g, ", preset == RiskPreset::linear ? "linear" : "abs", gap);
  }
  RiskSpec spec = risk_spec(kN, RiskPreset::linear, "wT + sin(t)");
  spec.drift = DriftSpec::parse("0.3", "0.2*s");
  const SelftestReport st = girsanov_selftest(risk_tilt(spec, sample_ensemble(spec.grid, 100000, kSeed)), 4.0);
  report(10, worst <= 0.02 && st.passed, "Girsanov route agreement",
         detail + fmt("(<=0.02); self-test M=1e5 max |z| mean %.3g, variance %.3g, weight %.3g "
                      "(<=%.3g per statistic, 4 sigma family-wise over %zu)",
                      st.max_mean_z, st.max_variance_z, std::abs(st.weight_z), st.per_test_threshold,
                      2 * st.mean_z.size() + 1));
}

void criterion_11() {
  const double c = 1.0;
  const RiskSpec spec = risk_spec(kN, RiskPreset::linear, "1");
  const RiskRun r = rho(spec, sample_ensemble(spec.grid, 1024, kSeed), {});
  double worst = 0.0;
  for (Index i = 0; i <= kN; ++i) {
    const double oracle = -c * std::exp(0.1 * (1.0 - spec.grid[i]));
    worst = std::max(worst, std::abs(r.rho.values.col(i).mean() - oracle) / std::abs(oracle));
  }
  report(11, worst <= 0.005, "deterministic position against the ODE solution",
         fmt("max relative error %.3g (<=0.005)", worst));
}

void criterion_12() {
  const ReferenceCase c = reference_case(CaseId::eq43);
  const PathEnsemble fine = sample_ensemble(case_grid(c, kN), 16384, kSeed);
  bool bitwise = true;
  std::vector<double> rms;
  for (Index n : {16, 32, 64}) {
    const PathEnsemble e = n == kN ? fine : coarsen(fine, n, 16384);
    const ProblemSpec p = case_problem(c, n);
    const ReferenceFields ref = reference_fields(c, e);
    const ResidualReport a = residual(p, ref.y, ref.z_s, Driver(e), ResidualForm::row);
    const ResidualReport b = residual(p, ref.y, ref.z_s, Driver(e), ResidualForm::column);
    bitwise = bitwise && a.per_node == b.per_node && a.rms == b.rms;
    rms.push_back(a.rms);
  }
  const bool falls = rms[1] < rms[0] && rms[2] < rms[1];
  report(12, bitwise && falls, "residual forms of the symmetric reference fields",
         fmt("eq1 == eq45 bitwise: %s; rms %.3g/%.3g/%.3g over N=16/32/64", bitwise ? "yes" : "no", rms[0],
             rms[1], rms[2]));
}

void criterion_13() {
  const ReferenceCase c = reference_case(CaseId::zero);
  const ProblemSpec base = case_problem(c, 32);
  const PathEnsemble e = sample_ensemble(base.grid, 16384, kSeed);
  const SolveReport r0 = solve(base, Driver(e), {});
  std::vector<double> scaled;
  for (double eps : {1e-2, 1e-3}) {
    ProblemSpec p = base;
    p.terminal = Terminal::parse(fmt("%.17g*(1 + wT + t*wT^2)", eps));
    const SolveReport r = solve(p, Driver(e), {});
    scaled.push_back(std::sqrt(y_distance_sq(r.y, r0.y) + z_distance_sq(r.z, r0.z, CellSet::upper)) / eps);
  }
  const double factor = std::max(scaled[0], scaled[1]) / std::min(scaled[0], scaled[1]);
  report(13, scaled[0] > 0.0 && factor <= 2.0, "stability in the terminal condition",
         fmt("||diff||/eps = %.4g, %.4g at eps = 1e-2, 1e-3; ratio %.4g (<=2)", scaled[0], scaled[1], factor));
}

void criterion_14() {
  int passed = 0;
  std::string first;
  for (const auto& c : golden::cases()) {
    const auto problem = golden::check(c);
    if (!problem) ++passed;
    else if (first.empty()) first = *problem;
  }
  const int total = static_cast<int>(golden::cases().size());
  report(14, passed == total && total == 20, "expression parser golden suite",
         fmt("%d/%d cases%s%s", passed, total, first.empty() ? "" : "; first mismatch: ", first.c_str()));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  s_solution_case(1, CaseId::eq43);
  s_solution_case(2, CaseId::eq44);
  criterion_3();
  criteria_4_5_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();
  criterion_12();
  criterion_13();
  criterion_14();
  std::printf("%d of 14 criteria failed (%.0fs)\n", failures, seconds_since(t0));
  return std::min(failures, 255);
}
