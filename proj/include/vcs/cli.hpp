#pragma once

namespace vcs {

// Entry point for the vcs command-line tool. Exit codes: 0 success,
// 1 runtime failure, 2 usage error, 3 validation failure.
int run(int argc, const char* const* argv);

}  // namespace vcs
