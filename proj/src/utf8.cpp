#include "csckit/utf8.hpp"

#include "csckit/error.hpp"

namespace csc {

namespace {

[[noreturn]] void bad(const std::string& context, std::size_t pos) {
  std::string where = context.empty() ? std::string{} : context + ": ";
  throw ParseError(where + "malformed UTF-8 at byte " + std::to_string(pos));
}

}  // namespace

std::vector<char32_t> utf8_decode(std::string_view s, const std::string& context) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char b0 = s[i];
    char32_t cp;
    int extra;
    if (b0 < 0x80) {
      cp = b0;
      extra = 0;
    } else if ((b0 & 0xe0) == 0xc0) {
      cp = b0 & 0x1f;
      extra = 1;
    } else if ((b0 & 0xf0) == 0xe0) {
      cp = b0 & 0x0f;
      extra = 2;
    } else if ((b0 & 0xf8) == 0xf0) {
      cp = b0 & 0x07;
      extra = 3;
    } else {
      bad(context, i);
    }
    if (i + extra >= s.size()) bad(context, i);
    for (int k = 1; k <= extra; ++k) {
      const unsigned char b = s[i + k];
      if ((b & 0xc0) != 0x80) bad(context, i + k);
      cp = (cp << 6) | (b & 0x3f);
    }
    // Reject overlong encodings and surrogate range.
    static constexpr char32_t kMin[4] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra] || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) bad(context, i);
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::string utf8_encode(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xc0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3f));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xe0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
    out += static_cast<char>(0x80 | (cp & 0x3f));
  } else {
    out += static_cast<char>(0xf0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
    out += static_cast<char>(0x80 | (cp & 0x3f));
  }
  return out;
}

std::string utf8_encode(const std::vector<char32_t>& cps) {
  std::string out;
  out.reserve(cps.size() * 3);
  for (char32_t cp : cps) out += utf8_encode(cp);
  return out;
}

std::string utf8_encode(std::u32string_view cps) {
  std::string out;
  out.reserve(cps.size() * 3);
  for (char32_t cp : cps) out += utf8_encode(cp);
  return out;
}

}  // namespace csc
