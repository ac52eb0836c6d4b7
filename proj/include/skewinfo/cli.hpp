#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace skewinfo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitSpec = 2;
inline constexpr int kExitVerification = 3;
inline constexpr int kExitAssumption = 4;

/// Runs one subcommand; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace skewinfo::cli
