#include "nsp/text_distance.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <vector>

#include "nsp/common.hpp"

namespace nsp::text {

std::size_t osa_distance(std::u32string_view a, std::u32string_view b) {
  const std::size_t m = a.size();
  const std::size_t n = b.size();
  if (m == 0) return n;
  if (n == 0) return m;

  // Three rolling rows: the transposition term reaches back to row i-2.
  std::vector<std::size_t> prev2(n + 1), prev(n + 1), curr(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = j;

  for (std::size_t i = 1; i <= m; ++i) {
    curr[0] = i;
    for (std::size_t j = 1; j <= n; ++j) {
      std::size_t cost = (a[i - 1] == b[j - 1]) ? 0 : 1;
      std::size_t best = std::min({prev[j] + 1,        // delete
                                   curr[j - 1] + 1,    // insert
                                   prev[j - 1] + cost  // substitute / match
      });
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) {
        best = std::min(best, prev2[j - 2] + 1);  // adjacent transposition
      }
      curr[j] = best;
    }
    std::swap(prev2, prev);
    std::swap(prev, curr);
  }
  return prev[n];
}

double similarity(std::u32string_view a, std::u32string_view b) {
  std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(osa_distance(a, b)) / static_cast<double>(longest);
}

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  auto bad = [&](std::size_t at) -> ValidationError {
    return ValidationError(fmt::format("invalid UTF-8 at byte offset {}", at));
  };
  while (i < s.size()) {
    unsigned char c0 = static_cast<unsigned char>(s[i]);
    if (c0 < 0x80) {
      out.push_back(c0);
      ++i;
      continue;
    }
    int extra;
    char32_t cp;
    char32_t min_cp;
    if ((c0 & 0xE0) == 0xC0) {
      extra = 1;
      cp = c0 & 0x1F;
      min_cp = 0x80;
    } else if ((c0 & 0xF0) == 0xE0) {
      extra = 2;
      cp = c0 & 0x0F;
      min_cp = 0x800;
    } else if ((c0 & 0xF8) == 0xF0) {
      extra = 3;
      cp = c0 & 0x07;
      min_cp = 0x10000;
    } else {
      throw bad(i);
    }
    if (i + static_cast<std::size_t>(extra) >= s.size()) throw bad(i);
    for (int k = 1; k <= extra; ++k) {
      unsigned char cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) throw bad(i);
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (cp < min_cp || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) throw bad(i);
    out.push_back(cp);
    i += 1 + extra;
  }
  return out;
}

std::string encode_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) {
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
  return out;
}

std::size_t osa_distance_utf8(std::string_view a, std::string_view b) {
  return osa_distance(decode_utf8(a), decode_utf8(b));
}

double similarity_utf8(std::string_view a, std::string_view b) {
  return similarity(decode_utf8(a), decode_utf8(b));
}

}  // namespace nsp::text
