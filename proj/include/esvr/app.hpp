#pragma once

// Command-line entry point: mine / personas / simulate / prefs / eval / report.
// Exit codes: 0 success, 1 pipeline error, 2 usage or config error. Failures
// print one "module: message" line to `err`.

#include <ostream>
#include <string>
#include <vector>

namespace esvr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPipeline = 1;
inline constexpr int kExitUsage = 2;

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace esvr
