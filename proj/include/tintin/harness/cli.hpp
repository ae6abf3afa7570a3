// SPDX-License-Identifier: Apache-2.0
#ifndef TINTIN_HARNESS_CLI_HPP_
#define TINTIN_HARNESS_CLI_HPP_

#include <ostream>

namespace tintin {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Command-line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tintin

#endif  // TINTIN_HARNESS_CLI_HPP_
