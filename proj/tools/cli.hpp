#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace spvlad::cli {

// Runs the command line `args` (without the program name). Returns the
// process exit status; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spvlad::cli
