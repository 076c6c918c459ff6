#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace csc {

// Decodes UTF-8 into unicode scalars. Throws ParseError on malformed input;
// `context` is prepended to the message (typically "file:line").
std::vector<char32_t> utf8_decode(std::string_view s, const std::string& context = {});

std::string utf8_encode(char32_t cp);
std::string utf8_encode(const std::vector<char32_t>& cps);
std::string utf8_encode(std::u32string_view cps);

}  // namespace csc
