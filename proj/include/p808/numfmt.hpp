#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace p808 {

// Shortest round-trip decimal representation; independent of the C locale.
std::string format_double(double value);

// Strict parsers: the whole cell must be consumed, no surrounding spaces.
std::optional<std::int64_t> parse_int(std::string_view s);
std::optional<double> parse_double(std::string_view s);
// Accepts 1/0/true/false.
std::optional<bool> parse_bool(std::string_view s);

}  // namespace p808
