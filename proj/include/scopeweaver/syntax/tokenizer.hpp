#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "scopeweaver/syntax/source_unit.hpp"

namespace scopeweaver::syntax {

enum class TokenKind : std::uint8_t {
  Name,
  Number,
  String,
  Op,
  Newline,
  Indent,
  Dedent,
  Comment,
  EndMarker,
};

std::string_view to_string(TokenKind kind) noexcept;

/// A token owns the trivia (whitespace, blank lines, line continuations)
/// that precedes it. Tokens tile the source: token[i].prefix_begin equals
/// token[i-1].end, and the final EndMarker ends at the source size.
/// Indent and Dedent are zero-width.
struct Token {
  TokenKind kind;
  std::uint32_t prefix_begin;
  std::uint32_t begin;
  std::uint32_t end;
  int line;   // 1-based, of `begin`
  int column; // 0-based byte column of `begin`

  std::string_view text(std::string_view source) const noexcept {
    return source.substr(begin, end - begin);
  }
  std::string_view prefix(std::string_view source) const noexcept {
    return source.substr(prefix_begin, begin - prefix_begin);
  }
};

struct TokenStream {
  std::string_view source; // not owned
  std::vector<Token> tokens;

  /// Concatenation of every prefix and text; equals `source` by construction.
  std::string reconstruct() const;
};

/// Tokenizes Python 3.11 source. Throws TokenizeError on bad indentation,
/// unterminated strings, stray characters, or unbalanced brackets at EOF.
/// The view must outlive the returned stream.
TokenStream tokenize(std::string_view source);
TokenStream tokenize(const SourceUnit &unit);

namespace detail {
/// Tokenizes source[begin, end) as a bracketed expression (used for f-string
/// replacement fields). Offsets in the result are relative to `source`.
std::vector<Token> tokenize_fragment(std::string_view source, std::uint32_t begin,
                                     std::uint32_t end, int line);
} // namespace detail

} // namespace scopeweaver::syntax
