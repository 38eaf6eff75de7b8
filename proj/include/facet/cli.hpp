#pragma once

#include <string>
#include <vector>

namespace facet::cli {

// Full CLI entry point: parses argv, runs the subcommand, maps errors to
// exit codes (config=2, data=3, numeric=4, io=5; unexpected=1).
int run(int argc, const char* const* argv);

// Same, but facet errors propagate to the caller. Tests use this to inspect
// error types and messages.
int run_or_throw(const std::vector<std::string>& args);

}  // namespace facet::cli
