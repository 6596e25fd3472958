#include "commands.hpp"
#include "run_config.hpp"

#include "bsvie/error.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

using namespace bsvie;

namespace {

struct Flag {
  const char* name;
  const char* key;
};

// Shortcut flags for the config keys each subcommand reads.
const Flag kGrid[] = {{"--n", "grid.N"}, {"--T", "grid.T"}, {"--S", "grid.S"}};
const Flag kEnsemble[] = {{"--m", "ensemble.M"}, {"--seed", "ensemble.seed"}};
const Flag kSolver[] = {{"--degree", "solver.degree"}, {"--ridge", "solver.ridge"},
                        {"--tol", "solver.tol"},       {"--max-iter", "solver.max_iter"},
                        {"--mode", "solver.mode"},     {"--picard", "solver.picard"}};
const Flag kProblem[] = {{"--case", "problem.case"},
                         {"--generator", "problem.generator"},
                         {"--terminal", "problem.terminal"}};
const Flag kRisk[] = {{"--preset", "risk.preset"}, {"--eta", "risk.eta"},     {"--f", "risk.f"},
                      {"--position", "risk.position"}, {"--r1", "risk.r1"}, {"--r2", "risk.r2"},
                      {"--route", "risk.route"}};
const Flag kAxioms[] = {{"--c", "axioms.c"},           {"--lambda", "axioms.lambda"},
                        {"--shift", "axioms.shift"},   {"--second", "axioms.second"},
                        {"--pivot", "axioms.pivot"}};
const Flag kVerify[] = {{"--levels", "verify.levels"}};
const Flag kResidual[] = {{"--form", "residual.form"}, {"--source", "residual.source"}};
const Flag kOutput[] = {{"--out", "output.dir"},     {"--csv", "output.csv"},
                        {"--json", "output.json"},   {"--svg", "output.svg"}};

struct Command {
  CLI::App* app = nullptr;
  std::string config_path;
  std::vector<std::string> sets;
  bool full_paths = false;
  std::map<std::string, std::optional<std::string>> flags;  // key -> value
};

template <std::size_t K>
void add_flags(Command& cmd, const Flag (&flags)[K]) {
  for (const Flag& f : flags) {
    const auto& fallback = app::RunConfig::schema().at(f.key);
    cmd.app->add_option(f.name, cmd.flags[f.key], std::string(f.key) + ": " + fallback.help);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Monte Carlo solver for backward stochastic Volterra integral equations"};
  cli.set_version_flag("--version", app::kVersion);
  cli.require_subcommand(1);

  std::map<std::string, Command> commands;
  auto make = [&](const std::string& name, const std::string& help) -> Command& {
    Command& c = commands[name];
    c.app = cli.add_subcommand(name, help);
    c.app->add_option("--config", c.config_path, "flat key = value config file");
    c.app->add_option("--set", c.sets, "key=value override (repeatable)");
    add_flags(c, kOutput);
    return c;
  };

  Command& solve = make("solve", "solve a reference case or a custom equation (modes s, m, adapted41)");
  add_flags(solve, kProblem);
  add_flags(solve, kGrid);
  add_flags(solve, kEnsemble);
  add_flags(solve, kSolver);
  solve.app->add_flag("--full-paths", solve.full_paths, "also write per-path Y and Z values");

  Command& risk = make("risk", "dynamic risk measure by the direct or girsanov route");
  add_flags(risk, kRisk);
  add_flags(risk, kGrid);
  add_flags(risk, kEnsemble);
  add_flags(risk, kSolver);
  risk.app->add_flag("--full-paths", risk.full_paths, "also write per-path rho values");

  Command& verify = make("verify", "convergence study of a reference case");
  add_flags(verify, kProblem);
  add_flags(verify, kEnsemble);
  add_flags(verify, kSolver);
  add_flags(verify, kVerify);

  Command& axioms = make("axioms", "check the risk measure axioms under common random numbers");
  add_flags(axioms, kRisk);
  add_flags(axioms, kAxioms);
  add_flags(axioms, kGrid);
  add_flags(axioms, kEnsemble);
  add_flags(axioms, kSolver);

  Command& residual = make("residual", "residual of the equation (forms eq1, eq45)");
  add_flags(residual, kProblem);
  add_flags(residual, kResidual);
  add_flags(residual, kGrid);
  add_flags(residual, kEnsemble);
  add_flags(residual, kSolver);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? app::ExitCode::ok : app::ExitCode::validation;
  }

  for (auto& [name, cmd] : commands) {
    if (!cmd.app->parsed()) continue;
    try {
      app::RunConfig config = cmd.config_path.empty() ? app::RunConfig() : app::RunConfig::load(cmd.config_path);
      for (const auto& [key, value] : cmd.flags)
        if (value) config.set(key, *value);
      if (cmd.full_paths) config.set("output.full_paths", "true");
      for (const std::string& kv : cmd.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
        config.set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      return app::run(name, config, std::cerr);
    } catch (const ValidationError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return app::ExitCode::validation;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return app::ExitCode::validation;
    }
  }
  return app::ExitCode::validation;
}
