#pragma once

#include <iosfwd>

namespace rstripe {

// Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure.
int cli(int argc, const char* const* argv);

// Quick invariant checks; returns the number of failures.
int selftest(std::ostream& os);

}  // namespace rstripe
