#include "sentinel/hex.hpp"

#include <algorithm>
#include <cctype>

namespace sentinel::hex {

bool is_hex_bytes(std::string_view s) {
    if (s.size() < 2 || s[0] != '0' || s[1] != 'x') return false;
    std::string_view d = s.substr(2);
    if (d.size() % 2 != 0) return false;
    return std::all_of(d.begin(), d.end(), is_hex_digit);
}

bool is_fixed_hex(std::string_view s, std::size_t digits) {
    if (s.size() != digits + 2 || s[0] != '0' || s[1] != 'x') return false;
    std::string_view d = s.substr(2);
    return std::all_of(d.begin(), d.end(), is_hex_digit);
}

std::string normalize(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string to_decimal(std::string_view hex_bytes) {
    std::string_view d = strip_prefix(hex_bytes);
    // Repeated multiply-by-16-and-add on a little-endian decimal digit vector.
    std::string dec = "0";
    for (char c : d) {
        int v = (c <= '9') ? c - '0' : c - 'a' + 10;
        int carry = v;
        for (auto it = dec.rbegin(); it != dec.rend(); ++it) {
            int x = (*it - '0') * 16 + carry;
            *it = static_cast<char>('0' + x % 10);
            carry = x / 10;
        }
        while (carry > 0) {
            dec.insert(dec.begin(), static_cast<char>('0' + carry % 10));
            carry /= 10;
        }
    }
    std::size_t nz = dec.find_first_not_of('0');
    return nz == std::string::npos ? "0" : dec.substr(nz);
}

}  // namespace sentinel::hex
