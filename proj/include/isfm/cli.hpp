#pragma once

#include <iosfwd>

namespace isfm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNoWork = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

/// Entry point of the `isfm` tool. Never throws; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace isfm::cli
