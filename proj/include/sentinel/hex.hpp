#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace sentinel::hex {

// Accepts "0x"-prefixed lowercase hex. Returns the digits without the prefix.
inline std::string_view strip_prefix(std::string_view s) {
    if (s.size() >= 2 && s[0] == '0' && s[1] == 'x') return s.substr(2);
    return s;
}

inline bool is_hex_digit(char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
}

// Valid iff "0x" followed by an even number of lowercase hex digits
// ("0x" alone denotes the empty byte string).
bool is_hex_bytes(std::string_view s);

// Valid iff "0x" + exactly `digits` lowercase hex digits.
bool is_fixed_hex(std::string_view s, std::size_t digits);

inline bool is_address(std::string_view s) { return is_fixed_hex(s, 40); }
inline bool is_word(std::string_view s) { return is_fixed_hex(s, 64); }

// Lowercases A-F; leaves everything else untouched.
std::string normalize(std::string_view s);

// Unsigned hex -> decimal string, no leading zeros ("0x" and "0x0" -> "0").
// Handles arbitrary width (EVM words are 256-bit).
std::string to_decimal(std::string_view hex_bytes);

}  // namespace sentinel::hex
