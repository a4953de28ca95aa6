#pragma once

#include <iosfwd>

namespace nearps::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Runs the `nearps` command line. Returns 0 on success, 2 on usage or input
/// errors and 1 on numeric failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nearps::cli
