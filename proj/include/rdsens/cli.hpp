#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rdsens::cli {

/// Exit codes: 0 success, 2 configuration error, 3 numerical/model error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// Runs the command-line tool on the given arguments (without argv[0]).
/// Normal output goes to `out`, diagnostics and machine-readable error JSON
/// to `err`.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

/// run() with std::cout/std::cerr.
int run_main(int argc, char** argv);

}  // namespace rdsens::cli
