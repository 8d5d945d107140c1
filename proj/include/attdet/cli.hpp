#pragma once

#include <string>
#include <vector>

namespace attdet {

/// Exit codes: 0 success, 1 infeasibility/unbounded Riccati/divergence,
/// 2 configuration or usage error. Diagnostics go to stderr.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInfeasible = 1;
inline constexpr int kExitConfig = 2;

/// Subcommands: design, simulate, verify, sweep. `args` excludes the program
/// name.
int run_cli(const std::vector<std::string>& args);

}  // namespace attdet
