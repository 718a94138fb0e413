#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace meltmap {

// Runs the meltmap command line. args excludes the program name.
// Returns 0 on success and 2 on any usage or domain error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace meltmap
