#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace xienh {

/// Runs one command line. Returns 0 on success, 2 on usage errors and 1 on
/// I/O or domain errors. argv[0] is the program name.
int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace xienh
