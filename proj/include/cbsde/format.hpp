#pragma once

#include <charconv>
#include <string>

namespace cbsde {

// Shortest-faithful decimal form used everywhere numbers are printed: the
// fewest digits that parse back to the same double bit for bit, so output is
// both readable and an exact round-trip. Negative zero is normalized so equal
// values always print identically.
inline std::string format_double(double value) {
    if (value == 0.0) value = 0.0;  // collapse -0
    char buf[40];
    const std::to_chars_result res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

}  // namespace cbsde
