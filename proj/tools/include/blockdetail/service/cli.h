#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace blockdetail {

/// Exit codes of run_cli.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // one JSON error line on `err`
inline constexpr int kExitUsage = 2;    // usage text on `err`

/// Entry point of the `blockdetail` tool. `args` excludes the program name.
/// Subcommands: synth-data, train, generate, bench, ablate-n, metrics, serve.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace blockdetail
