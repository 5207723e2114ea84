#pragma once

#include <iosfwd>

namespace cbsde {

// Entry point of the CLI: `cbsde <solve|transfer|verify> --config <path>
// [--csv <path>] [--seed <u64>] [--quiet]`. Writes the result record to `out`
// and diagnostics to `err`. Returns the process exit code: 0 success,
// 2 config/usage error, 3 solver non-convergence, 4 divergence, 5 property
// suite failure.
int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cbsde
