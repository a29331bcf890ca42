#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace donorplan {

// Process exit statuses of the command-line tool.
enum ExitStatus : int {
  kExitOk = 0,
  kExitError = 1,       // bad input data, I/O failure, solver error
  kExitUsage = 2,       // unknown command or option, bad option value
  kExitInfeasible = 3,  // some hard-mode window had no feasible radius
  kExitViolations = 4,  // validation found constraint violations
};

inline constexpr const char* kToolVersion = "0.1.0";

// Runs one command line (args[0] is the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace donorplan
