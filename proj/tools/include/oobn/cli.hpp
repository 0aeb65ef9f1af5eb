#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace oobn {

// Exit codes of the oobn tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitModelError = 1;
inline constexpr int kExitUsage = 2;

// Runs the command line `args` (args[0] is the program name).
int cli_main(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace oobn
