#pragma once

#include <ostream>

namespace bbdm {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // verification or metric failure, divergence
inline constexpr int kExitUsage = 2;    // bad arguments, configuration or input files

/// Entry point of the `bbdm` tool: verify | train | sample | eval | info.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bbdm
