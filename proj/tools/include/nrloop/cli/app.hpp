#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nrloop::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// Runs the tool with argv-style arguments (without the program name).
/// Results go to `out` unless an output path is set; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nrloop::cli
