#pragma once

namespace vsr::cli {

// Entry point for the vsr tool. Returns the process exit code:
// 0 success, 2 bad arguments, 3 data error, 4 runtime error.
int run(int argc, const char* const* argv);

}  // namespace vsr::cli
