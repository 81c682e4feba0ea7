#pragma once

#include <string>
#include <vector>

namespace rasor {

// Exit codes shared by every verb: 0 success, 1 check failure,
// 2 usage/config error, 3 I/O error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;

// Entry point behind main(); takes argv-style arguments (argv[0] is the
// program name) so tests can drive it in-process.
int cli_main(const std::vector<std::string>& args);
int cli_main(int argc, const char* const* argv);

}  // namespace rasor
