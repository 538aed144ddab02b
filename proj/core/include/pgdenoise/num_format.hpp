#pragma once

#include <string>
#include <string_view>

namespace pgd {

// Shortest round-trip decimal form of a double; infinities print as
// "inf"/"-inf". Used for CSV and log output so emitted files are
// byte-deterministic and parse back losslessly.
std::string format_double(double v);

// Inverse of format_double; accepts "inf"/"-inf". Throws ArgumentError on
// malformed input.
double parse_double(std::string_view s);

}  // namespace pgd
