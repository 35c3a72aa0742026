#pragma once

#include <string>
#include <vector>

namespace vvord {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitNumerical = 2;

/// Entry point of the `vvord` tool; args excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace vvord
