#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgnet/common.hpp"

namespace dgnet {

// Minimal strict UTF-8 codec. Plate labels mix ASCII with CJK province
// characters, so character-level logic (grammar checks, edit distance)
// has to run on codepoints, not bytes.

inline std::vector<std::uint32_t> utf8_decode(const std::string& s) {
  std::vector<std::uint32_t> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    std::uint32_t cp = 0;
    int extra = 0;
    if (c < 0x80) {
      cp = c;
    } else if ((c & 0xE0) == 0xC0) {
      cp = c & 0x1F;
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      cp = c & 0x0F;
      extra = 2;
    } else if ((c & 0xF8) == 0xF0) {
      cp = c & 0x07;
      extra = 3;
    } else {
      throw ParseError("utf8_decode: invalid lead byte at offset " + std::to_string(i));
    }
    if (i + extra >= s.size())
      throw ParseError("utf8_decode: truncated sequence at offset " + std::to_string(i));
    for (int k = 1; k <= extra; ++k) {
      const unsigned char cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80)
        throw ParseError("utf8_decode: invalid continuation byte at offset " +
                         std::to_string(i + k));
      cp = (cp << 6) | (cc & 0x3F);
    }
    out.push_back(cp);
    i += 1 + extra;
  }
  return out;
}

inline std::string utf8_encode(std::uint32_t cp) {
  std::string out;
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
  return out;
}

inline std::size_t utf8_length(const std::string& s) { return utf8_decode(s).size(); }

// Splits a UTF-8 string into single-codepoint strings.
inline std::vector<std::string> utf8_chars(const std::string& s) {
  std::vector<std::string> out;
  for (std::uint32_t cp : utf8_decode(s)) out.push_back(utf8_encode(cp));
  return out;
}

}  // namespace dgnet
