#include <doctest.h>

#include "strata/text.hpp"

using namespace strata;

TEST_CASE("trim and blank") {
    CHECK(text::trim("  a b \n\t") == "a b");
    CHECK(text::trim("") == "");
    CHECK(text::is_blank(" \n\t"));
    CHECK_FALSE(text::is_blank(" x "));
}

TEST_CASE("whitespace tokens split on ideographic space too") {
    auto t = text::whitespace_tokens("a  b\n c\xE3\x80\x80" "d");
    REQUIRE(t.size() == 4);
    CHECK(t[0] == "a");
    CHECK(t[3] == "d");
    CHECK(text::whitespace_tokens("   ").empty());
    CHECK(text::join(t, "-") == "a-b-c-d");
}

TEST_CASE("utf8 decode and encode round trip") {
    const std::string s = "a\xC3\xA9\xE4\xB8\xAD\xF0\x9F\x98\x80";  // a é 中 😀
    auto cps = text::codepoints(s);
    REQUIRE(cps.size() == 4);
    CHECK(cps[1] == U'é');
    CHECK(cps[2] == U'中');
    CHECK(cps[3] == U'\U0001F600');
    std::string back;
    for (char32_t cp : cps) text::append_utf8(back, cp);
    CHECK(back == s);
}

TEST_CASE("truncated utf8 does not read past the end") {
    const std::string s = "\xE4\xB8";
    std::size_t pos = 0;
    text::next_codepoint(s, pos);
    CHECK(pos <= s.size());
}

TEST_CASE("cjk detection and ratio") {
    CHECK(text::is_cjk(U'中'));
    CHECK(text::is_cjk(U'あ'));  // hiragana
    CHECK_FALSE(text::is_cjk(U'a'));
    CHECK(text::cjk_ratio("abc") == doctest::Approx(0.0));
    CHECK(text::cjk_ratio("\xE4\xB8\xAD\xE6\x96\x87") == doctest::Approx(1.0));
    CHECK(text::cjk_ratio("") == doctest::Approx(0.0));
}

TEST_CASE("unicode punctuation") {
    CHECK(text::is_unicode_punct(U'.'));
    CHECK(text::is_unicode_punct(U'。'));  // ideographic full stop
    CHECK(text::is_unicode_punct(U'，'));  // fullwidth comma
    CHECK_FALSE(text::is_unicode_punct(U'a'));
    CHECK_FALSE(text::is_unicode_punct(U'中'));
}

TEST_CASE("fnv1a64 known vectors") {
    CHECK(text::fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(text::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(text::fnv1a64("foobar") == 0x85944171f73967e8ULL);
}
