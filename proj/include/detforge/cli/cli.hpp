#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace detforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `detforge` invocation; argv[0] is the program name. Returns the
/// process exit code: 0 on success, 1 on a domain error, 2 on a usage error.
int run_command(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace detforge::cli
