#include "strata/text.hpp"

namespace strata::text {

namespace {

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::string_view trim(std::string_view s) {
    std::size_t b = 0;
    while (b < s.size() && is_ascii_space(s[b])) ++b;
    std::size_t e = s.size();
    while (e > b && is_ascii_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

bool is_blank(std::string_view s) {
    return trim(s).empty();
}

std::vector<std::string> whitespace_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t start = pos;
        char32_t cp = next_codepoint(s, pos);
        bool space = (cp < 0x80 && is_ascii_space(static_cast<char>(cp))) || cp == 0x3000;
        if (space) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.append(s.substr(start, pos - start));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

char32_t next_codepoint(std::string_view s, std::size_t& pos) {
    auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    unsigned char c = byte(pos);
    if (c < 0x80) {
        ++pos;
        return c;
    }
    int extra = 0;
    char32_t cp = 0;
    if ((c & 0xE0) == 0xC0) {
        extra = 1;
        cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
        extra = 2;
        cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
        extra = 3;
        cp = c & 0x07;
    } else {
        ++pos;
        return 0xFFFD;
    }
    if (pos + extra >= s.size()) {
        ++pos;
        return 0xFFFD;
    }
    for (int i = 1; i <= extra; ++i) {
        unsigned char cc = byte(pos + i);
        if ((cc & 0xC0) != 0x80) {
            ++pos;
            return 0xFFFD;
        }
        cp = (cp << 6) | (cc & 0x3F);
    }
    pos += extra + 1;
    return cp;
}

std::vector<char32_t> codepoints(std::string_view s) {
    std::vector<char32_t> out;
    std::size_t pos = 0;
    while (pos < s.size()) out.push_back(next_codepoint(s, pos));
    return out;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_cjk(char32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) ||    // unified ideographs
           (cp >= 0x3400 && cp <= 0x4DBF) ||    // extension A
           (cp >= 0x20000 && cp <= 0x2FA1F) ||  // extensions B..F, compat supplement
           (cp >= 0xF900 && cp <= 0xFAFF) ||    // compatibility ideographs
           (cp >= 0x3040 && cp <= 0x30FF);      // hiragana, katakana
}

bool is_unicode_punct(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) || (cp >= 0x5B && cp <= 0x60) ||
               (cp >= 0x7B && cp <= 0x7E);
    }
    return (cp >= 0x2010 && cp <= 0x2027) ||  // dashes, quotes, ellipsis
           (cp >= 0x2030 && cp <= 0x205E) ||  // per mille .. general punctuation
           (cp >= 0x3001 && cp <= 0x3003) ||  // 、。〃
           (cp >= 0x3008 && cp <= 0x3011) ||  // CJK brackets
           (cp >= 0x3014 && cp <= 0x301F) ||
           cp == 0x30FB ||                     // katakana middle dot
           (cp >= 0xFF01 && cp <= 0xFF0F) ||  // fullwidth ASCII punctuation
           (cp >= 0xFF1A && cp <= 0xFF20) || (cp >= 0xFF3B && cp <= 0xFF40) ||
           (cp >= 0xFF5B && cp <= 0xFF65) || cp == 0x00A1 || cp == 0x00A7 || cp == 0x00AB ||
           cp == 0x00B6 || cp == 0x00B7 || cp == 0x00BB || cp == 0x00BF;
}

double cjk_ratio(std::string_view s) {
    std::size_t total = 0;
    std::size_t cjk = 0;
    std::size_t pos = 0;
    while (pos < s.size()) {
        char32_t cp = next_codepoint(s, pos);
        if ((cp < 0x80 && is_ascii_space(static_cast<char>(cp))) || cp == 0x3000) continue;
        ++total;
        if (is_cjk(cp)) ++cjk;
    }
    return total == 0 ? 0.0 : static_cast<double>(cjk) / static_cast<double>(total);
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace strata::text
