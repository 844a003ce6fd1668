#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace divkit::cli {

/// Runs the command line with argv[1..] in `args`. Returns the process exit
/// code: 0 success, 1 I/O, 2 validation, 3 internal invariant breach.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace divkit::cli
