#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Small UTF-8 and tokenization helpers shared by every module.
namespace strata::text {

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
bool is_blank(std::string_view s);

// Whitespace-delimited tokens (ASCII whitespace plus U+3000).
std::vector<std::string> whitespace_tokens(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Decodes one code point starting at `pos` and advances it. Invalid bytes
// decode as U+FFFD and consume a single byte.
char32_t next_codepoint(std::string_view s, std::size_t& pos);
std::vector<char32_t> codepoints(std::string_view s);
void append_utf8(std::string& out, char32_t cp);

// Han ideographs (all extension blocks), compatibility ideographs and kana.
bool is_cjk(char32_t cp);
bool is_unicode_punct(char32_t cp);

// Fraction of non-whitespace code points that are CJK; 0 for empty input.
double cjk_ratio(std::string_view s);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace strata::text
