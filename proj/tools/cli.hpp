#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vqmd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

const std::vector<std::string>& commands();

/// Closest known command by edit distance, or "" if nothing is close.
std::string suggest_command(const std::string& unknown);

/// Runs one command. `args` excludes the program name. Returns the exit code:
/// 0 success, 1 usage error, 2 runtime error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vqmd::cli
