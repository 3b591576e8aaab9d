#pragma once

#include <string>
#include <string_view>

// Thin wrappers over OpenSSL digests; all outputs are lowercase hex.
namespace p808::crypto {

std::string sha256_hex(std::string_view data);
std::string hmac_sha256_hex(std::string_view key, std::string_view message);

std::string to_hex(std::string_view bytes);
// Throws ParseError on odd length or non-hex characters.
std::string from_hex(std::string_view hex);

// Comparison whose duration does not depend on where the inputs differ.
bool constant_time_equal(std::string_view a, std::string_view b);

}  // namespace p808::crypto
