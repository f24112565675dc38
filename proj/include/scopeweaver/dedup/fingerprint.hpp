#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace scopeweaver::dedup {

/// Token serialization with comments dropped: "KIND text" per token,
/// structural tokens as bare markers, joined by NUL. Input that does not
/// tokenize falls back to line normalization.
std::string normalize(std::string_view source);

/// Fallback used by normalize(): CRLF to LF, trailing blanks stripped,
/// blank lines dropped.
std::string normalize_lines(std::string_view source);

/// 32-hex MD5 of normalize(source).
std::string fingerprint(std::string_view source);

} // namespace scopeweaver::dedup
