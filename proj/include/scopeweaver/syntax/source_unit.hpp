#pragma once

#include <string>
#include <string_view>

namespace scopeweaver::syntax {

/// One source file as raw bytes plus its content digest.
struct SourceUnit {
  std::string path;     // repository-relative, '/' separated
  std::string bytes;
  std::string sha1;     // hex SHA-1 of bytes
  std::string encoding = "utf-8";

  static SourceUnit from_bytes(std::string path, std::string bytes);
};

/// True when `bytes` is well-formed UTF-8 (no overlongs, no surrogates).
bool is_valid_utf8(std::string_view bytes) noexcept;

} // namespace scopeweaver::syntax
