#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace swd::utf8 {

/// Decodes UTF-8; malformed sequences become U+FFFD.
std::u32string decode(std::string_view text);
std::string encode(char32_t cp);
std::string encode(std::u32string_view text);

bool is_space(char32_t cp);
bool is_newline(char32_t cp);

}  // namespace swd::utf8
