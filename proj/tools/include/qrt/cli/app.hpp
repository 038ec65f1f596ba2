#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qrt::cli {

/// Parses `args` (args[0] is the program name) and runs one verb. Progress
/// goes to `out`, diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qrt::cli
