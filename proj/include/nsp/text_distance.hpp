#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace nsp::text {

// Optimal String Alignment distance (restricted Damerau-Levenshtein):
// insert, delete, substitute, and adjacent transposition, with no substring
// edited more than once. Operates on Unicode scalar values; callers normalize
// first.
std::size_t osa_distance(std::u32string_view a, std::u32string_view b);

// 1 - distance / max(|a|, |b|); 1.0 when both strings are empty.
double similarity(std::u32string_view a, std::u32string_view b);

// Strict UTF-8 decode to scalar values. Throws ValidationError on invalid
// sequences (overlong forms, surrogates, truncation).
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

std::size_t osa_distance_utf8(std::string_view a, std::string_view b);
double similarity_utf8(std::string_view a, std::string_view b);

}  // namespace nsp::text
