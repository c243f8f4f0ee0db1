#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qident {

enum ExitCode : int {
    kExitOk = 0,
    kExitInvalid = 1, ///< usage, config or weight-validation errors
    kExitRuntime = 2, ///< numeric, state or I/O failures
};

/// Entry point behind the `qident` executable. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace qident
