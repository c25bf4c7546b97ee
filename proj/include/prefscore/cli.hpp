#pragma once

#include <string>
#include <vector>

namespace prefscore::cli {

/// Run one CLI invocation (argv without the program name). Returns the
/// process exit code: 0 success, 1 runtime error, 2 usage error.
int dispatch(const std::vector<std::string>& args);

}  // namespace prefscore::cli
