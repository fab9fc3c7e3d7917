#pragma once

#include <string>
#include <vector>

namespace angcn::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line tool. `args` excludes the program name.
int run(const std::vector<std::string>& args);

} // namespace angcn::cli
