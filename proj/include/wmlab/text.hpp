#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wmlab {

// Lenient UTF-8 handling. A malformed byte is treated as a one-byte
// character so that every byte string has a well-defined character
// segmentation and all operations stay total.

struct Utf8Char {
    char32_t cp;            // decoded code point, or the raw byte for malformed input
    std::uint32_t offset;   // byte offset in the source string
    std::uint32_t size;     // byte length (1..4)
};

inline std::vector<Utf8Char> utf8_decode(const std::string& s) {
    std::vector<Utf8Char> out;
    out.reserve(s.size());
    std::uint32_t i = 0;
    const auto n = static_cast<std::uint32_t>(s.size());
    while (i < n) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        std::uint32_t len = 1;
        char32_t cp = b0;
        if (b0 < 0x80) {
            len = 1;
        } else if ((b0 >> 5) == 0x6) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 >> 4) == 0xE) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 >> 3) == 0x1E) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            out.push_back({b0, i, 1});
            ++i;
            continue;
        }
        if (i + len > n) {
            out.push_back({b0, i, 1});
            ++i;
            continue;
        }
        bool ok = true;
        for (std::uint32_t k = 1; k < len; ++k) {
            const auto bk = static_cast<unsigned char>(s[i + k]);
            if ((bk >> 6) != 0x2) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (bk & 0x3F);
        }
        if (!ok) {
            out.push_back({b0, i, 1});
            ++i;
            continue;
        }
        out.push_back({cp, i, len});
        i += len;
    }
    return out;
}

inline void utf8_append(std::string& s, char32_t cp) {
    if (cp < 0x80) {
        s.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        s.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        s.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        s.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        s.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline std::string utf8_encode(const std::vector<char32_t>& cps) {
    std::string s;
    s.reserve(cps.size());
    for (char32_t cp : cps) utf8_append(s, cp);
    return s;
}

inline std::vector<char32_t> to_codepoints(const std::string& s) {
    std::vector<char32_t> cps;
    const auto chars = utf8_decode(s);
    cps.reserve(chars.size());
    for (const auto& c : chars) cps.push_back(c.cp);
    return cps;
}

// Character count with multi-byte characters counting as one.
inline std::size_t char_count(const std::string& s) { return utf8_decode(s).size(); }

inline bool is_ascii_letter(char32_t cp) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
}

inline bool is_ascii_digit(char32_t cp) { return cp >= '0' && cp <= '9'; }

inline bool is_ascii_space(char32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v';
}

inline char32_t to_lower_ascii(char32_t cp) {
    return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
}

inline constexpr char32_t kZeroWidthSpace = 0x200B;

}  // namespace wmlab
