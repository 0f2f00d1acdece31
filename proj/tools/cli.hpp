#pragma once

#include <iosfwd>

namespace linmix::cli {

enum ExitCode { kSuccess = 0, kUsage = 1, kCheckFailed = 2 };

/// Entry point of the `linmix` command; writes diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace linmix::cli
