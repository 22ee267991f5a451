#pragma once

#include <string>
#include <string_view>

namespace unac {

/// Lower-case hex SHA-256 of the input bytes.
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::string_view data);
/// Throws std::invalid_argument on malformed input.
std::string base64_decode(std::string_view text);

}  // namespace unac
