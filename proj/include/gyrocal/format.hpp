#pragma once

#include <string>
#include <string_view>

namespace gyrocal {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Strict full-field parse; throws std::invalid_argument on trailing junk.
double parse_double(std::string_view text);

}  // namespace gyrocal
