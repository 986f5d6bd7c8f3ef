#pragma once

#include <iosfwd>

namespace kinetunnel::cli {

/// Exit codes of the command-line tool.
inline constexpr int kOk = 0;
inline constexpr int kDataError = 1;
inline constexpr int kUsageError = 2;

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kinetunnel::cli
