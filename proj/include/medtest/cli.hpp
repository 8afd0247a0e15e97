#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace medtest::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Parses `args` (without the program name) and runs the selected command.
/// Returns 0 on success, 2 on usage errors and 1 on data or runtime errors;
/// verify-theorems also returns 1 when a counterexample is found.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads a flat `key = value` file (`#` comments) into `--key=value`
/// arguments. Throws std::runtime_error naming the line on malformed input.
std::vector<std::string> config_arguments(const std::string& path);

}  // namespace medtest::cli
