#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace posekit {

/// Exit codes of the command-line front end.
enum ExitCode : int { kExitOk = 0, kExitDomainError = 1, kExitUsage = 2 };

/// Runs one subcommand. `args` excludes the program name. Data goes to `out`,
/// logs and errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace posekit
