#include <doctest.h>

#include <string>

#include "nsp/common.hpp"
#include "nsp/text_distance.hpp"
#include "oracles.hpp"

using namespace nsp;

TEST_CASE("osa distance hand-checked pairs") {
  CHECK(text::osa_distance(U"", U"") == 0);
  CHECK(text::osa_distance(U"", U"abc") == 3);
  CHECK(text::osa_distance(U"abc", U"") == 3);
  CHECK(text::osa_distance(U"abc", U"abc") == 0);
  CHECK(text::osa_distance(U"abc", U"acb") == 1);   // one transposition
  CHECK(text::osa_distance(U"abcd", U"badc") == 2); // two disjoint transpositions
  CHECK(text::osa_distance(U"kitten", U"sitting") == 3);
  // The restricted-alignment hallmark: unrestricted Damerau gives 2 here.
  CHECK(text::osa_distance(U"CA", U"ABC") == 3);
  CHECK(text::osa_distance(U"a", U"b") == 1);
}

TEST_CASE("osa distance is symmetric and bounded") {
  const std::u32string a = U"headline about earnings";
  const std::u32string b = U"headline about mergers";
  auto d = text::osa_distance(a, b);
  CHECK(d == text::osa_distance(b, a));
  CHECK(d <= std::max(a.size(), b.size()));
}

TEST_CASE("osa distance agrees with the recursive oracle on random short strings") {
  oracle::Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    std::u32string a, b;
    int la = rng.uniform_int(0, 6), lb = rng.uniform_int(0, 6);
    for (int i = 0; i < la; ++i) a.push_back(U'a' + static_cast<char32_t>(rng.uniform_int(0, 3)));
    for (int i = 0; i < lb; ++i) b.push_back(U'a' + static_cast<char32_t>(rng.uniform_int(0, 3)));
    CHECK(text::osa_distance(a, b) == oracle::osa_recursive(a, b));
  }
}

TEST_CASE("similarity definition") {
  CHECK(text::similarity(U"", U"") == doctest::Approx(1.0));
  CHECK(text::similarity(U"abc", U"abc") == doctest::Approx(1.0));
  CHECK(text::similarity(U"abc", U"") == doctest::Approx(0.0));
  // distance 1 over max length 4
  CHECK(text::similarity(U"abcd", U"abed") == doctest::Approx(0.75));
  CHECK(text::similarity_utf8("abcd", "abed") == doctest::Approx(0.75));
}

TEST_CASE("utf8 decode round-trips and counts scalars") {
  CHECK(text::decode_utf8("abc").size() == 3);
  CHECK(text::decode_utf8("caf\xc3\xa9").size() == 4);       // e-acute
  CHECK(text::decode_utf8("\xe2\x82\xac").size() == 1);      // euro sign
  CHECK(text::decode_utf8("\xf0\x9f\x99\x82").size() == 1);  // emoji, astral plane
  const std::string s = "caf\xc3\xa9 \xe2\x82\xac";
  CHECK(text::encode_utf8(text::decode_utf8(s)) == s);
}

TEST_CASE("utf8 decode rejects malformed input") {
  CHECK_THROWS_AS(text::decode_utf8("\xc0\xaf"), ValidationError);          // overlong
  CHECK_THROWS_AS(text::decode_utf8("\xed\xa0\x80"), ValidationError);      // surrogate
  CHECK_THROWS_AS(text::decode_utf8("\xe2\x82"), ValidationError);          // truncated
  CHECK_THROWS_AS(text::decode_utf8("\xff"), ValidationError);              // stray byte
  CHECK_THROWS_AS(text::decode_utf8("a\x80"), ValidationError);             // lone continuation
}

TEST_CASE("osa distance on multi-byte scalars counts characters not bytes") {
  // One substitution between two 3-byte characters.
  CHECK(text::osa_distance_utf8("\xe2\x82\xac", "\xe2\x84\x96") == 1);
}
