#pragma once

#include <string>
#include <string_view>

namespace qa::text {

// All character offsets in this project count Unicode code points, not bytes.

std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);
std::string encode_utf8(char32_t c);

char32_t to_lower(char32_t c);
bool is_whitespace(char32_t c);
bool is_punctuation(char32_t c);

std::size_t length(std::string_view utf8);
/// Code points [begin, end) of `utf8`, re-encoded.
std::string substr(std::string_view utf8, std::size_t begin, std::size_t end);
std::string lowercase(std::string_view utf8);

}  // namespace qa::text
