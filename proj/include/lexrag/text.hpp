#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lexrag::text {

/// Splits on '\n'. A trailing newline yields a final empty element.
std::vector<std::string_view> split_lines(std::string_view s);

std::string_view trim(std::string_view s);
std::string ascii_lower(std::string_view s);
bool is_blank(std::string_view s);

/// Lowercased maximal runs of ASCII alphanumerics; bytes >= 0x80 count as
/// word characters so non-ASCII words stay intact.
std::vector<std::string> word_tokens(std::string_view s);

/// Maximal runs of non-whitespace, as views into `s`.
std::vector<std::string_view> whitespace_tokens(std::string_view s);

std::size_t count_whitespace_tokens(std::string_view s);

}  // namespace lexrag::text
