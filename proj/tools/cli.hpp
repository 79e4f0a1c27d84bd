#pragma once

#include <exception>
#include <ostream>
#include <string>
#include <vector>

namespace qswitch::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kInfeasible = 2, kRuntimeViolation = 3 };

/// Runs one CLI invocation; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

/// Self-contained matplotlib script that plots |x| and |xi| from trajectory.csv
/// next to it.
std::string plot_script();

/// "1.0" for integral values, shortest round-trip form otherwise.
std::string format_number(double v);

}  // namespace qswitch::cli
