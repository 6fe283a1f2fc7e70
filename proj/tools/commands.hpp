#pragma once

#include <iosfwd>

namespace cmkerr::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kNumerical = 2, kIo = 3 };

/// Entire command line, argv[0] included. Library errors become exit codes;
/// diagnostics go to `err`, reports to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cmkerr::cli
