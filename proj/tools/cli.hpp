#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tife::cli {

enum ExitCode : int { kSuccess = 0, kUsageError = 1, kDataError = 2 };

/// Runs the `tife` command line. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tife::cli
