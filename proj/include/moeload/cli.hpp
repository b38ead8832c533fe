#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace moeload::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Runs one command line; args[0] is the program name. Data goes to files or `out`,
// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace moeload::cli
