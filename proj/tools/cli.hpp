#pragma once

#include <iosfwd>

namespace azsearch::cli {

/// Entry point for the `azsearch` tool. Returns 0 on success, otherwise the
/// error category code (2 config, 3 data, 4 numeric). Diagnostics go to
/// `err` as one JSON object per line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace azsearch::cli
