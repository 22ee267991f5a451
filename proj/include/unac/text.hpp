#pragma once

// Small string helpers shared by the response parsers.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace unac::text {

std::string trim(std::string_view s);
std::string lower(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Rest of the last line whose trimmed text starts with `tag` (case-insensitive,
/// markdown emphasis like "**FINAL:**" tolerated), trimmed.
std::optional<std::string> last_tagged_line(std::string_view response, std::string_view tag);

/// Lowercase alphanumeric words.
std::vector<std::string> words(std::string_view s);

}  // namespace unac::text
