#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace skembed {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 1,
  kExitInfeasible = 2,
  kExitVerifyFailed = 3,
  kExitBarrierKind = 4,
};

/// Runs one invocation. args excludes the program name. Output files named
/// "-" (the default) go to `out`; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace skembed
