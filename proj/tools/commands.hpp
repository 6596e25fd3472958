#pragma once

#include "run_config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace bsvie::app {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { ok = 0, validation = 1, nonconvergence = 2, check_failed = 3 };

/// Output directory of a run: output.dir if set, else
/// $BSVIE_OUTPUT_ROOT (or ./bsvie-out) / <subcommand>-<config hash>.
std::filesystem::path output_dir(const std::string& subcommand, const RunConfig& config);

/// Runs one subcommand (solve, risk, verify, axioms, residual) and writes its
/// artifacts and manifest. Progress goes to `log`. Library exceptions are
/// mapped to exit codes by run().
int run(const std::string& subcommand, const RunConfig& config, std::ostream& log);

}  // namespace bsvie::app
