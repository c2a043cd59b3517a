#pragma once

namespace styleforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

/// Parses and runs one command line; returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace styleforge::cli
