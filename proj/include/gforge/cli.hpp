#pragma once

#include <iosfwd>

namespace gforge {

// The gforge command line. Returns the process exit code: 0 on success, 1 for
// domain errors (one diagnostic line on err), 2 for usage errors.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gforge
