#pragma once

#include <string>
#include <vector>

namespace dvd::cli {

/// Command-line entry point; exposed as a function so tests can drive it.
/// Exit codes: 0 success, 1 usage error, 2 runtime error.
int run(const std::vector<std::string>& args);

}  // namespace dvd::cli
