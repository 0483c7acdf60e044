#pragma once

// Subcommand driver for the `proxsafe` executable. Lives in a library so tests
// can run commands in-process.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace proxsafe::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes: 0 success, 1 domain error, 2 environment error (missing or
/// unwritable files, bad usage).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace proxsafe::cli
