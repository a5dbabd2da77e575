#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pbnn::cli {

enum ExitCode : int { exit_ok = 0, exit_runtime = 1, exit_usage = 2, exit_config = 3 };

/// Parses `args` (program name excluded) and runs the chosen subcommand.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pbnn::cli
