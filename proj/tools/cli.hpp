#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace standda::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericFailure = 3, kIoError = 4 };

/// Runs one invocation; args exclude the program name. Everything the
/// command prints goes to `out`/`err`; files go under the output directory.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace standda::cli
