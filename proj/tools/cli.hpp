#pragma once

#include <iosfwd>

namespace eyedas::cli {

// Runs the `eyedas` command line. Returns the exit status: 0 on success,
// 2 for usage errors, 1 for runtime errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eyedas::cli
