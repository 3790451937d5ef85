#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace diagno {

/// Renders with 17 significant digits, which round-trips any IEEE double exactly.
std::string format_double(double value);

/// Strict parse of the whole field; nullopt on trailing garbage or empty input.
std::optional<double> parse_double(std::string_view text);

/// Short human-oriented rendering (for prompts and reports), at most `digits` significant digits.
std::string format_short(double value, int digits = 4);

} // namespace diagno
