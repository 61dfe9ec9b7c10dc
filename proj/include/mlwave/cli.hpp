#pragma once

namespace mlwave {

// Entry point for the `mlwave` tool. Exit codes: 0 success, 1 usage error,
// 2 data or format error, 3 numerical failure. Diagnostics go to stderr.
int run_cli(int argc, const char* const* argv);

}  // namespace mlwave
