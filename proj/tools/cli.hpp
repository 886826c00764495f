#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dmap::tools {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRejected = 1;
inline constexpr int kExitError = 2;

// Runs the dmap command line. `args` excludes the program name. Standard
// input is read only when an input path is "-".
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err);

}  // namespace dmap::tools
