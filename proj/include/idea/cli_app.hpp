#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace idea::cli {

/// Entry point behind the idea binary: train, eval, forecast,
/// shift-experiment, stats. Returns the process exit code; all diagnostics
/// go to `err` with an "error:" prefix.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace idea::cli
