#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace agrn::cli {

/// Runs the agrn command line on `args` (without the program name).
/// Returns 0 on success or help, 2 on usage errors, 1 on runtime failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace agrn::cli
