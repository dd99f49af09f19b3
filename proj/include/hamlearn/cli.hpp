#pragma once

#include <string>
#include <vector>

namespace hamlearn::cli {

/// Entry point behind the hamlearn binary; exposed so tests can drive the
/// command surface in-process. Exit codes: 0 success, 2 config error,
/// 3 integration failure, 4 training divergence, 5 sweep total failure.
int run_cli(const std::vector<std::string>& args);

} // namespace hamlearn::cli
