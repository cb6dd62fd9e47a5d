#pragma once

#include <iosfwd>

namespace moranq {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitUsage = 2,
  kExitAdequacy = 3,
};

/// Entry point of the `moranq` tool; output goes to `out` unless --out is
/// given, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace moranq
