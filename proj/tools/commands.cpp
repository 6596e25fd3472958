#include "commands.hpp"

#include "artifacts.hpp"

#include "bsvie/analytic.hpp"
#include "bsvie/error.hpp"
#include "bsvie/expr.hpp"
#include "bsvie/risk.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <ostream>

namespace bsvie::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Context {
  std::string subcommand;
  const RunConfig& config;
  std::ostream& log;
  ArtifactDir out;
  json summary = json::object();
  bool csv = true;
  bool js = true;
  bool svg = true;
};

std::optional<ReferenceCase> config_case(const RunConfig& cfg) {
  const std::string& id = cfg.text("problem.case");
  if (id.empty()) return std::nullopt;
  return reference_case(parse_case_id(id));
}

Index positive_index(const RunConfig& cfg, const std::string& key) {
  const long long v = cfg.integer(key);
  if (v <= 0) throw ValidationError("config: " + key + " must be positive");
  return static_cast<Index>(v);
}

TimeGrid config_grid(const RunConfig& cfg, const std::optional<ReferenceCase>& c) {
  const Index n = positive_index(cfg, "grid.N");
  const double start = cfg.explicitly_set("grid.S") ? cfg.number("grid.S") : c ? c->start : 0.0;
  const double horizon = cfg.explicitly_set("grid.T") ? cfg.number("grid.T") : c ? c->horizon : 1.0;
  if (c && (start != c->start || horizon != c->horizon)) {
    throw ValidationError("config: case " + std::string(case_name(c->id)) + " lives on [" +
                          format_double(c->start) + ", " + format_double(c->horizon) + "]");
  }
  return build_grid(horizon, n, start);
}

SolveMode parse_mode(const std::string& m) {
  if (m == "s") return SolveMode::s_solution;
  if (m == "m") return SolveMode::m_solution;
  if (m == "adapted41") return SolveMode::adapted41;
  throw ValidationError("config: solver.mode must be s, m or adapted41, got '" + m + "'");
}

const char* mode_name(SolveMode m) {
  switch (m) {
    case SolveMode::s_solution: return "s";
    case SolveMode::m_solution: return "m";
    case SolveMode::adapted41: return "adapted41";
  }
  return "?";
}

SolverConfig solver_config(const RunConfig& cfg) {
  SolverConfig sc;
  const long long degree = cfg.integer("solver.degree");
  if (degree < 1 || degree > 8) throw ValidationError("config: solver.degree must be in [1, 8]");
  sc.basis.degree = static_cast<int>(degree);
  sc.basis.ridge = cfg.number("solver.ridge");
  if (!(sc.basis.ridge >= 0.0)) throw ValidationError("config: solver.ridge must be >= 0");
  sc.tol = cfg.number("solver.tol");
  if (!(sc.tol > 0.0)) throw ValidationError("config: solver.tol must be > 0");
  const long long iters = cfg.integer("solver.max_iter");
  if (iters < 1) throw ValidationError("config: solver.max_iter must be >= 1");
  sc.max_iter = static_cast<int>(iters);
  sc.mode = parse_mode(cfg.text("solver.mode"));
  sc.picard = cfg.flag("solver.picard");
  return sc;
}

ProblemSpec config_problem(const RunConfig& cfg, const std::optional<ReferenceCase>& c,
                           const TimeGrid& grid) {
  const bool custom = !cfg.text("problem.generator").empty() || !cfg.text("problem.terminal").empty();
  if (c) {
    if (custom) throw ValidationError("config: problem.case excludes problem.generator/terminal");
    return case_problem(*c, grid.steps());
  }
  if (cfg.text("problem.generator").empty() || cfg.text("problem.terminal").empty()) {
    throw ValidationError("config: set problem.case or both problem.generator and problem.terminal");
  }
  ProblemSpec p;
  p.grid = grid;
  p.generator = Generator::parse(cfg.text("problem.generator"));
  p.terminal = Terminal::parse(cfg.text("problem.terminal"));
  p.label = "custom";
  return p;
}

PathEnsemble config_ensemble(const RunConfig& cfg, const TimeGrid& grid) {
  const Index m = positive_index(cfg, "ensemble.M");
  return sample_ensemble(grid, m, cfg.unsigned_integer("ensemble.seed"));
}

RiskSpec config_risk(const RunConfig& cfg, const TimeGrid& grid) {
  RiskSpec spec;
  spec.grid = grid;
  const std::string& preset = cfg.text("risk.preset");
  if (preset == "linear") spec.preset = RiskPreset::linear;
  else if (preset == "abs") spec.preset = RiskPreset::abs;
  else if (preset == "custom") spec.preset = RiskPreset::custom;
  else throw ValidationError("config: risk.preset must be linear, abs or custom, got '" + preset + "'");
  spec.eta = expr::parse(cfg.text("risk.eta"));
  if (!cfg.text("risk.f").empty()) {
    if (spec.preset != RiskPreset::custom) throw ValidationError("config: risk.f needs risk.preset = custom");
    spec.f = expr::parse(cfg.text("risk.f"));
  }
  spec.position = Terminal::parse(cfg.text("risk.position"));
  spec.drift = DriftSpec::parse(cfg.text("risk.r1"), cfg.text("risk.r2"));
  const std::string& route = cfg.text("risk.route");
  if (route == "direct") spec.route = RiskRoute::direct;
  else if (route == "girsanov") spec.route = RiskRoute::girsanov;
  else throw ValidationError("config: risk.route must be direct or girsanov, got '" + route + "'");
  // Fails early on bad expressions.
  (void)risk_problem(spec, spec.route);
  return spec;
}

Table node_table(const AdaptedField& y) {
  Table t{{"i", "t", "mean", "stderr"}, {}};
  const double m = static_cast<double>(y.paths());
  for (Index i = 0; i < y.values.cols(); ++i) {
    const auto col = y.values.col(i).array();
    const double mean = col.mean();
    const double var = m > 1 ? (col - mean).square().sum() / (m - 1) : 0.0;
    t.add({static_cast<long long>(i), y.grid[i], mean, std::sqrt(var / m)});
  }
  return t;
}

Table surface_table(const SurfaceField& z) {
  Table t{{"i", "j", "t_i", "t_j", "mean", "stderr"}, {}};
  const double m = static_cast<double>(z.paths());
  for (Index i = 0; i < z.size(); ++i) {
    for (Index j = 0; j < z.size(); ++j) {
      if (!z.defined(i, j)) continue;
      const Eigen::ArrayXd v = z.values(i, j);
      const double mean = v.mean();
      const double var = m > 1 ? (v - mean).square().sum() / (m - 1) : 0.0;
      t.add({static_cast<long long>(i), static_cast<long long>(j), z.grid()[i], z.grid()[j], mean,
             std::sqrt(var / m)});
    }
  }
  return t;
}

void write_full_paths(Context& ctx, const AdaptedField& y, const SurfaceField* z) {
  const double cells = z ? static_cast<double>(z->size() * z->size()) : 0.0;
  const double bytes = static_cast<double>(y.paths()) * (static_cast<double>(y.values.cols()) + cells) * 24.0;
  ctx.log << "warning: --full-paths writes about " << format_double(std::round(bytes / 1e6))
          << " MB of per-path values\n";
  Table yt;
  yt.header.push_back("path");
  for (Index i = 0; i < y.values.cols(); ++i) yt.header.push_back("y_" + std::to_string(i));
  for (Index p = 0; p < y.paths(); ++p) {
    std::vector<Cell> row{static_cast<long long>(p)};
    for (Index i = 0; i < y.values.cols(); ++i) row.emplace_back(y.values(p, i));
    yt.add(std::move(row));
  }
  ctx.out.write_table("y_paths.csv", yt);
  if (!z) return;
  Table zt{{"path", "i", "j", "value"}, {}};
  for (Index i = 0; i < z->size(); ++i)
    for (Index j = 0; j < z->size(); ++j) {
      if (!z->defined(i, j)) continue;
      const Eigen::ArrayXd v = z->values(i, j);
      for (Index p = 0; p < v.size(); ++p)
        zt.add({static_cast<long long>(p), static_cast<long long>(i), static_cast<long long>(j), v[p]});
    }
  ctx.out.write_table("z_paths.csv", zt);
}

json errors_json(const ErrorReport& e) {
  return {{"y", number_or_null(e.y)},
          {"z_diagonal", number_or_null(e.z_diagonal)},
          {"z_lower", number_or_null(e.z_lower)},
          {"z_upper", number_or_null(e.z_upper)}};
}

json report_json(const SolveReport& r) {
  json blocks = json::array();
  for (const auto& [b, e] : r.blocks) blocks.push_back({b, e});
  const NormReport norms = star_h2_norm(r.y, r.z);
  return {{"mode", mode_name(r.mode)},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"update_norms", r.update_norms},
          {"contraction_ratios", r.contraction_ratios},
          {"blocks", blocks},
          {"norms", {{"y_l2", norms.y_l2}, {"z_l2", norms.z_l2}, {"z_upper", norms.z_upper},
                     {"s2", s2_norm(r.y, r.z)}}}};
}

ResidualForm parse_form(const std::string& f) {
  if (f == "eq1") return ResidualForm::row;
  if (f == "eq45") return ResidualForm::column;
  throw ValidationError("config: residual.form must be eq1 or eq45, got '" + f + "'");
}

int cmd_solve(Context& ctx) {
  const RunConfig& cfg = ctx.config;
  const auto c = config_case(cfg);
  const TimeGrid grid = config_grid(cfg, c);
  const ProblemSpec problem = config_problem(cfg, c, grid);
  const SolverConfig sc = solver_config(cfg);
  const PathEnsemble ens = config_ensemble(cfg, grid);
  ctx.log << "solve: " << problem.label << " N=" << grid.steps() << " M=" << ens.paths()
          << " mode=" << mode_name(sc.mode) << (sc.picard ? " picard" : "") << "\n";
  const SolveReport rep = solve(problem, Driver(ens), sc);
  if (ctx.csv) {
    ctx.out.write_table("y.csv", node_table(rep.y));
    ctx.out.write_table("z.csv", surface_table(rep.z));
  }
  ctx.summary["solve"] = report_json(rep);
  if (c) {
    const ReferenceFields ref = reference_fields(*c, ens);
    const ErrorReport e = error_metrics(rep, ref);
    ctx.summary["errors"] = errors_json(e);
    if (ctx.csv) {
      Table t{{"region", "relative_l2"}, {}};
      t.add({"y", e.y});
      t.add({"z_upper", e.z_upper});
      t.add({"z_lower", e.z_lower});
      t.add({"z_diagonal", e.z_diagonal});
      ctx.out.write_table("errors.csv", t);
    }
    ctx.log << "errors: y=" << format_double(e.y) << " z_upper=" << format_double(e.z_upper) << "\n";
  }
  if (cfg.flag("output.full_paths")) write_full_paths(ctx, rep.y, &rep.z);
  return ExitCode::ok;
}

int cmd_risk(Context& ctx) {
  const RunConfig& cfg = ctx.config;
  const TimeGrid grid = config_grid(cfg, std::nullopt);
  const RiskSpec spec = config_risk(cfg, grid);
  const PathEnsemble ens = config_ensemble(cfg, grid);
  const RiskRun run = rho(spec, ens, solver_config(cfg));
  if (ctx.csv) ctx.out.write_table("rho.csv", node_table(run.rho));
  ctx.summary["risk"] = {{"route", spec.route == RiskRoute::direct ? "direct" : "girsanov"},
                         {"generator", run.fingerprint.generator},
                         {"rms_norm", rms_norm(run.rho)},
                         {"iterations", run.report.iterations},
                         {"rho0_mean", run.rho.values.col(0).mean()}};
  if (spec.route == RiskRoute::girsanov) {
    const SelftestReport st = girsanov_selftest(risk_tilt(spec, ens));
    ctx.summary["girsanov_selftest"] = {{"passed", st.passed},
                                        {"max_mean_z", st.max_mean_z},
                                        {"max_variance_z", st.max_variance_z},
                                        {"weight_z", st.weight_z},
                                        {"threshold", st.threshold},
                                        {"per_test_threshold", st.per_test_threshold}};
  }
  if (cfg.flag("output.full_paths")) write_full_paths(ctx, run.rho, nullptr);
  ctx.log << "risk: rho(t0) mean = " << format_double(run.rho.values.col(0).mean()) << "\n";
  return ExitCode::ok;
}

struct Check {
  std::string name;
  double value;
  double threshold;
  bool passed;
};

int cmd_verify(Context& ctx) {
  const RunConfig& cfg = ctx.config;
  const std::string id = cfg.text("problem.case").empty() ? "eq43" : cfg.text("problem.case");
  const ReferenceCase c = reference_case(parse_case_id(id));
  const SolverConfig sc = solver_config(cfg);
  std::vector<Level> levels;
  for (const LevelSpec& l : parse_levels(cfg.text("verify.levels"), cfg.integer("ensemble.M"))) {
    if (l.steps < 2 || l.paths < 2) throw ValidationError("config: verify.levels entries need N, M >= 2");
    levels.push_back({static_cast<Index>(l.steps), static_cast<Index>(l.paths)});
  }
  ctx.log << "verify: " << id << " over " << levels.size() << " levels\n";
  const auto rows = convergence_study(c, levels, sc, cfg.unsigned_integer("ensemble.seed"));

  Table t{{"N", "M", "error_y", "error_z_upper", "error_z_lower", "error_z_diagonal", "order_y",
           "order_z_upper", "residual_rms", "iterations"},
          {}};
  auto opt = [](const std::optional<double>& v) { return v ? Cell(*v) : Cell::empty(); };
  std::vector<double> ns, ey, ezu, ezl;
  for (const auto& r : rows) {
    t.add({static_cast<long long>(r.level.steps), static_cast<long long>(r.level.paths), r.errors.y,
           r.errors.z_upper, r.errors.z_lower, r.errors.z_diagonal, opt(r.order_y), opt(r.order_z_upper),
           r.residual_rms, r.iterations});
    ns.push_back(static_cast<double>(r.level.steps));
    ey.push_back(r.errors.y);
    ezu.push_back(r.errors.z_upper);
    ezl.push_back(r.errors.z_lower);
    ctx.log << "  N=" << r.level.steps << " y=" << format_double(r.errors.y)
            << " z_upper=" << format_double(r.errors.z_upper) << "\n";
  }

  std::vector<Check> checks;
  if (c.id == CaseId::zero) {
    double worst = 0.0;
    for (const auto& r : rows)
      for (double v : {r.errors.y, r.errors.z_upper, r.errors.z_diagonal,
                       std::isnan(r.errors.z_lower) ? 0.0 : r.errors.z_lower})
        worst = std::max(worst, v);
    checks.push_back({"all_zero", worst, 0.0, worst == 0.0});
  } else {
    const auto& fine = rows.back().errors;
    checks.push_back({"y_finest", fine.y, 0.05, fine.y <= 0.05});
    checks.push_back({"z_upper_finest", fine.z_upper, 0.10, fine.z_upper <= 0.10});
    if (sc.mode == SolveMode::m_solution && std::isfinite(fine.z_lower)) {
      checks.push_back({"z_lower_finest", fine.z_lower, 0.10, fine.z_lower <= 0.10});
    }
    for (std::size_t k = 1; k < rows.size(); ++k) {
      const auto& a = rows[k - 1].errors;
      const auto& b = rows[k].errors;
      const std::string at = "_" + std::to_string(rows[k].level.steps);
      checks.push_back({"y_decrease" + at, b.y / a.y, 1.10, b.y <= 1.10 * a.y});
      checks.push_back({"z_upper_decrease" + at, b.z_upper / a.z_upper, 1.10, b.z_upper <= 1.10 * a.z_upper});
    }
  }
  bool passed = true;
  json jc = json::array();
  for (const Check& ch : checks) {
    passed = passed && ch.passed;
    jc.push_back({{"name", ch.name}, {"passed", ch.passed}, {"threshold", ch.threshold},
                  {"value", number_or_null(ch.value)}});
    ctx.log << "  " << (ch.passed ? "ok   " : "FAIL ") << ch.name << " = " << format_double(ch.value)
            << " (limit " << format_double(ch.threshold) << ")\n";
  }
  ctx.summary["verify"] = {{"case", id}, {"checks", jc}, {"passed", passed}};
  if (ctx.csv) ctx.out.write_table("convergence.csv", t);
  if (ctx.svg) {
    std::vector<Series> s{{"Y", ey}, {"Z upper", ezu}};
    if (sc.mode == SolveMode::m_solution) s.push_back({"Z lower", ezl});
    ctx.out.write("convergence.svg", loglog_svg("Convergence: " + id, ns, s));
  }
  return passed ? ExitCode::ok : ExitCode::check_failed;
}

int cmd_axioms(Context& ctx) {
  const RunConfig& cfg = ctx.config;
  const TimeGrid grid = config_grid(cfg, std::nullopt);
  const RiskSpec spec = config_risk(cfg, grid);
  AxiomPerturbations pert;
  pert.c = cfg.number("axioms.c");
  pert.lambda = cfg.number("axioms.lambda");
  pert.shift = cfg.number("axioms.shift");
  if (!(pert.lambda > 0.0)) throw ValidationError("config: axioms.lambda must be > 0");
  if (!(pert.shift >= 0.0)) throw ValidationError("config: axioms.shift must be >= 0");
  pert.second = Terminal::parse(cfg.text("axioms.second"));
  pert.pivot = static_cast<Index>(cfg.integer("axioms.pivot"));
  const PathEnsemble ens = config_ensemble(cfg, grid);
  const AxiomReport rep = check_axioms(spec, pert, ens, solver_config(cfg));

  Table t{{"axiom", "applicable", "passed", "judged_on", "max_violation", "rms_violation", "tolerance",
           "samples", "q50", "q90", "q99", "q100", "note"},
          {}};
  json ja = json::array();
  for (const AxiomResult& a : rep.axioms) {
    std::vector<Cell> row{a.name, a.applicable ? "true" : "false", a.passed ? "true" : "false",
                          a.judged_on_rms ? "rms" : "max", a.max_violation, a.rms_violation,
                          a.tolerance, static_cast<long long>(a.samples)};
    for (std::size_t k = 0; k < 4; ++k) row.push_back(k < a.quantiles.size() ? Cell(a.quantiles[k]) : Cell::empty());
    row.emplace_back(a.note);
    t.add(std::move(row));
    ja.push_back({{"name", a.name}, {"applicable", a.applicable}, {"passed", a.passed},
                  {"judged_on", a.judged_on_rms ? "rms" : "max"},
                  {"max_violation", a.max_violation}, {"rms_violation", a.rms_violation},
                  {"tolerance", a.tolerance}, {"samples", a.samples}, {"quantiles", a.quantiles},
                  {"note", a.note}});
    ctx.log << "  " << (a.passed ? "ok   " : "FAIL ") << a.name
            << (a.applicable ? "" : " (not applicable)") << " max=" << format_double(a.max_violation)
            << " rms=" << format_double(a.rms_violation) << "\n";
  }

  // Oracle column: rho(t; c) = -c exp(int_t^T eta) for the constant position c.
  const Eigen::VectorXd discrete = discrete_discount(spec);
  const Eigen::VectorXd continuous = continuous_discount(spec);
  Table d{{"i", "t", "discount_discrete", "discount_exp", "oracle_rho_const", "translation_defect_max"}, {}};
  RiskSpec constant = spec;
  constant.position = Terminal::constant(pert.c);
  const bool linear = spec.preset == RiskPreset::linear;
  std::optional<RiskRun> crun;
  if (linear) crun = rho(constant, ens, solver_config(cfg));
  for (Index i = 0; i <= grid.steps(); ++i) {
    Cell defect = Cell::empty();
    if (crun) defect = (crun->rho.values.col(i).array() + pert.c * continuous[i]).abs().maxCoeff();
    d.add({static_cast<long long>(i), grid[i], discrete[i], continuous[i], -pert.c * continuous[i], defect});
  }
  ctx.summary["axioms"] = {{"axioms", ja}, {"discount_gap", rep.discount_gap}, {"passed", rep.passed()},
                           {"rho_norm", rep.rho_norm}};
  if (ctx.csv) {
    ctx.out.write_table("axioms.csv", t);
    ctx.out.write_table("discount.csv", d);
  }
  return rep.passed() ? ExitCode::ok : ExitCode::check_failed;
}

int cmd_residual(Context& ctx) {
  const RunConfig& cfg = ctx.config;
  const auto c = config_case(cfg);
  const TimeGrid grid = config_grid(cfg, c);
  const ProblemSpec problem = config_problem(cfg, c, grid);
  const SolverConfig sc = solver_config(cfg);
  const PathEnsemble ens = config_ensemble(cfg, grid);
  const ResidualForm form = parse_form(cfg.text("residual.form"));
  const std::string& source = cfg.text("residual.source");

  ResidualReport rep;
  if (source == "reference") {
    if (!c) throw ValidationError("config: residual.source = reference needs problem.case");
    const ReferenceFields ref = reference_fields(*c, ens);
    const SurfaceField* z = &ref.z_s;
    if (sc.mode == SolveMode::m_solution && ref.z_m) z = &*ref.z_m;
    if (form == ResidualForm::column && ref.z_column) z = &*ref.z_column;
    rep = residual(problem, ref.y, *z, Driver(ens), form);
  } else if (source == "solve") {
    const SolveReport s = solve(problem, Driver(ens), sc);
    rep = residual(problem, s.y, s.z, Driver(ens), form);
  } else {
    throw ValidationError("config: residual.source must be reference or solve, got '" + source + "'");
  }
  Table t{{"i", "t", "rms"}, {}};
  for (Index i = 0; i < rep.per_node.size(); ++i) t.add({static_cast<long long>(i), grid[i], rep.per_node[i]});
  if (ctx.csv) ctx.out.write_table("residual.csv", t);
  ctx.summary["residual"] = {{"form", cfg.text("residual.form")}, {"max", rep.max}, {"rms", rep.rms},
                             {"source", source}};
  ctx.log << "residual(" << cfg.text("residual.form") << "): rms=" << format_double(rep.rms) << "\n";
  return ExitCode::ok;
}

void write_manifest(Context& ctx, double seconds, int code) {
  json config = json::object();
  for (const auto& [k, v] : ctx.config.values()) config[k] = v;
  json m = {{"config", config},
            {"config_hash", hex64(ctx.config.hash())},
            {"exit_code", code},
            {"seed", ctx.config.unsigned_integer("ensemble.seed")},
            {"subcommand", ctx.subcommand},
            {"tables", ctx.out.checksums()},
            {"version", kVersion},
            {"wall_clock_seconds", seconds}};
  ctx.out.write_json("manifest.json", m);
}

}  // namespace

fs::path output_dir(const std::string& subcommand, const RunConfig& config) {
  if (!config.text("output.dir").empty()) return config.text("output.dir");
  const char* root = std::getenv("BSVIE_OUTPUT_ROOT");
  const fs::path base = root && *root ? fs::path(root) : fs::path("bsvie-out");
  return base / (subcommand + "-" + hex64(config.hash()).substr(0, 12));
}

int run(const std::string& subcommand, const RunConfig& config, std::ostream& log) {
  using Fn = int (*)(Context&);
  Fn fn = nullptr;
  if (subcommand == "solve") fn = cmd_solve;
  else if (subcommand == "risk") fn = cmd_risk;
  else if (subcommand == "verify") fn = cmd_verify;
  else if (subcommand == "axioms") fn = cmd_axioms;
  else if (subcommand == "residual") fn = cmd_residual;
  else throw ValidationError("unknown subcommand '" + subcommand + "'");

  // Validate flags that every command reads before touching the disk.
  (void)config.flag("output.csv");
  (void)config.flag("output.json");
  (void)config.flag("output.svg");
  (void)config.flag("output.full_paths");

  const auto begin = std::chrono::steady_clock::now();
  Context ctx{subcommand, config, log, ArtifactDir(output_dir(subcommand, config))};
  ctx.csv = config.flag("output.csv");
  ctx.js = config.flag("output.json");
  ctx.svg = config.flag("output.svg");
  int code = ExitCode::ok;
  try {
    code = fn(ctx);
  } catch (const NonConvergence& e) {
    ctx.summary["solve"] = report_json(e.report());
    ctx.summary["error"] = e.what();
    code = ExitCode::nonconvergence;
  }
  ctx.summary["exit_code"] = code;
  if (ctx.js) ctx.out.write_json("summary.json", ctx.summary);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
  write_manifest(ctx, seconds, code);
  log << "wrote " << ctx.out.path().string() << "\n";
  return code;
}

}  // namespace bsvie::app
