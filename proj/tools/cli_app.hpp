#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace noisyrag::cli {

/// Runs one command line (without the program name). Returns the process
/// exit code: 0 success, 1 validation error, 2 runtime error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace noisyrag::cli
