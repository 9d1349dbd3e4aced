#pragma once

#include <string>
#include <string_view>

namespace minesearch {

// Shortest text that parses back to the same double. Locale independent.
std::string fmt_exact(double v);

// General format with `digits` significant digits.
std::string fmt_sig(double v, int digits);

// Strict locale-independent parse; throws ConfigError on trailing junk.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::string trim(std::string_view s);

}  // namespace minesearch
