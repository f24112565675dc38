#pragma once

#include <string>
#include <string_view>

namespace scopeweaver {

/// Lowercase hex SHA-1 of `bytes` (40 chars).
std::string sha1_hex(std::string_view bytes);

/// Lowercase hex MD5 of `bytes` (32 chars).
std::string md5_hex(std::string_view bytes);

} // namespace scopeweaver
