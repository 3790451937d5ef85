#include "diagno/numeric_format.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace diagno {

std::string format_double(double value) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, 17);
    return std::string(buf.data(), res.ptr);
}

std::optional<double> parse_double(std::string_view text) {
    if (text.empty()) {
        return std::nullopt;
    }
    // from_chars rejects a leading '+', which other writers emit
    if (text.front() == '+') {
        text.remove_prefix(1);
    }
    double out = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return out;
}

std::string format_short(double value, int digits) {
    if (!std::isfinite(value)) {
        return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
    }
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, digits);
    return std::string(buf.data(), res.ptr);
}

} // namespace diagno
