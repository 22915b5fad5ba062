#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace crossrecipe::unicode {

// Decodes UTF-8; malformed bytes become U+FFFD so downstream code never sees
// a partial sequence.
inline std::u32string decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    auto b0 = static_cast<unsigned char>(s[i]);
    char32_t cp = 0xFFFD;
    std::size_t len = 1;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 >> 5) == 0x6) {
      len = 2;
    } else if ((b0 >> 4) == 0xE) {
      len = 3;
    } else if ((b0 >> 3) == 0x1E) {
      len = 4;
    }
    if (len > 1) {
      if (i + len > s.size()) {
        len = 1;
      } else {
        cp = b0 & (0xFF >> (len + 1));
        bool ok = true;
        for (std::size_t k = 1; k < len; ++k) {
          auto b = static_cast<unsigned char>(s[i + k]);
          if ((b >> 6) != 0x2) {
            ok = false;
            break;
          }
          cp = (cp << 6) | (b & 0x3F);
        }
        if (!ok) {
          cp = 0xFFFD;
          len = 1;
        }
      }
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
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

inline std::string encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) append_utf8(out, cp);
  return out;
}

// Same set Python's str.split() treats as whitespace.
inline bool is_space(char32_t c) {
  switch (c) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
    case 0x1C: case 0x1D: case 0x1E: case 0x1F: case 0x20:
    case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

inline bool is_ascii_alnum(char32_t c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline bool is_ascii_punct(char32_t c) {
  return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
         (c >= 0x7B && c <= 0x7E);
}

// CJK and fullwidth punctuation blocks.
inline bool is_cjk_punct(char32_t c) {
  return (c >= 0x3000 && c <= 0x303F) || (c >= 0xFF01 && c <= 0xFF0F) ||
         (c >= 0xFF1A && c <= 0xFF20) || (c >= 0xFF3B && c <= 0xFF40) ||
         (c >= 0xFF5B && c <= 0xFF65) || (c >= 0x2010 && c <= 0x2027) ||
         (c >= 0x2030 && c <= 0x205E);
}

inline bool is_punct(char32_t c) { return is_ascii_punct(c) || is_cjk_punct(c); }

using Range = std::pair<char32_t, char32_t>;

// Emoji, pictographs and emoji presentation components.
inline constexpr std::array<Range, 33> kEmojiRanges{{
    {0x200D, 0x200D},   // zero width joiner
    {0x203C, 0x203C},   {0x2049, 0x2049},
    {0x20E3, 0x20E3},   // combining keycap
    {0x2139, 0x2139},   {0x2194, 0x2199}, {0x21A9, 0x21AA},
    {0x231A, 0x231B},   {0x2328, 0x2328}, {0x23CF, 0x23CF},
    {0x23E9, 0x23F3},   {0x23F8, 0x23FA}, {0x24C2, 0x24C2},
    {0x25AA, 0x25AB},   {0x25B6, 0x25B6}, {0x25C0, 0x25C0},
    {0x25FB, 0x25FE},
    {0x2600, 0x26FF},   // miscellaneous symbols
    {0x2700, 0x27BF},   // dingbats
    {0x2934, 0x2935},   {0x2B05, 0x2B07}, {0x2B1B, 0x2B1C},
    {0x2B50, 0x2B50},   {0x2B55, 0x2B55},
    {0x3030, 0x3030},   {0x303D, 0x303D}, {0x3297, 0x3297},
    {0x3299, 0x3299},
    {0xFE00, 0xFE0F},   // variation selectors
    {0x1F000, 0x1F0FF}, // mahjong, domino, playing cards
    {0x1F100, 0x1F1FF}, // enclosed alphanumeric supplement, regional indicators
    {0x1F300, 0x1FAFF}, // pictographs, emoticons, transport, supplemental
    {0xE0020, 0xE007F}, // tag sequences
}};

inline bool in_ranges(char32_t c, const std::vector<Range>& ranges) {
  return std::any_of(ranges.begin(), ranges.end(),
                     [c](const Range& r) { return c >= r.first && c <= r.second; });
}

inline bool is_emoji(char32_t c) {
  return std::any_of(kEmojiRanges.begin(), kEmojiRanges.end(),
                     [c](const Range& r) { return c >= r.first && c <= r.second; });
}

inline std::string ascii_lower(std::string s) {
  for (char& ch : s) {
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  }
  return s;
}

// Splits on Python-compatible whitespace.
inline std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::u32string cps = decode(text);
  std::u32string cur;
  for (char32_t c : cps) {
    if (is_space(c)) {
      if (!cur.empty()) {
        out.push_back(encode(cur));
        cur.clear();
      }
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(encode(cur));
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace crossrecipe::unicode
