#include <iostream>

// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria are implemented alongside the modules they exercise;
// until the suite is complete this reports failure unconditionally so the
// gate can never silently pass.

int main() {
    std::cerr << "[FAIL] acceptance suite not implemented yet\n";
    return 1;
}
