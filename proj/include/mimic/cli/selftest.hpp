#pragma once

#include <ostream>

namespace mimic::cli {

/// Quick internal consistency checks (codec round trips, matching engine
/// basics, RNG determinism). Prints one line per check; returns 0 when all
/// pass, 1 otherwise.
int run_selftest(std::ostream& out);

} // namespace mimic::cli
