#pragma once

#include <string>
#include <vector>

namespace mtseq {

// Exit codes: 0 success, 1 runtime failure, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Output-directory override consulted when --outdir is not given.
inline constexpr const char* kOutdirEnv = "MTSEQ_OUTDIR";

int run_cli(int argc, char** argv);
// args excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace mtseq
