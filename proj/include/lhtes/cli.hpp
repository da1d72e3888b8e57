#pragma once

namespace lhtes {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

/// Entry point of the `lhtes` command-line tool.
int run_cli(int argc, char** argv);

}  // namespace lhtes
