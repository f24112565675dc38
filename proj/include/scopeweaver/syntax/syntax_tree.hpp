#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scopeweaver/syntax/ast.hpp"
#include "scopeweaver/syntax/source_unit.hpp"
#include "scopeweaver/syntax/tokenizer.hpp"

namespace scopeweaver::syntax {

/// Grammar revision accepted by the parser. Newer syntax is a SyntaxError.
inline constexpr std::string_view kGrammarRevision = "python-3.11";

/// First line of the comment block the assembler writes at the top of every
/// generated module. A file that starts with it keeps that block in
/// SyntaxTree::header instead of attaching it to the first statement.
inline constexpr std::string_view kGeneratedMarker = "# @generated by scopeweaver";

struct ByteSpan {
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
  std::uint32_t size() const noexcept { return end - begin; }
  friend bool operator==(const ByteSpan &, const ByteSpan &) = default;
};

/// A top-level statement together with the trivia that precedes it
/// (blank lines, comments) and its terminating newline.
struct TopLevelItem {
  ByteSpan full;
  const Node *stmt = nullptr;
  std::uint32_t index = 0; // position in the original file order

  /// Byte range of the statement itself, without leading trivia.
  ByteSpan statement_span() const noexcept {
    return stmt ? ByteSpan{stmt->begin, full.end} : full;
  }
};

/// Lossless concrete tree for one source unit. The top-level items, the
/// optional generated header, and the end trivia tile the source.
/// `top_level` may be reordered; emit() then produces the permuted text.
class SyntaxTree {
public:
  std::string path;
  std::string sha1;
  std::optional<ByteSpan> header;
  std::vector<TopLevelItem> top_level;
  ByteSpan end_trivia;

  std::string_view source() const noexcept { return *source_; }
  const TokenStream &tokens() const noexcept { return tokens_; }
  std::string_view text(ByteSpan span) const noexcept {
    return source().substr(span.begin, span.size());
  }
  std::string_view text(const Node &node) const noexcept {
    return source().substr(node.begin, node.end - node.begin);
  }
  std::size_t node_count() const noexcept { return arena_.size(); }

private:
  friend class Parser;
  friend SyntaxTree parse_lossless(const SourceUnit &unit);
  friend SyntaxTree parse_source(std::string path, std::string bytes);
  std::shared_ptr<const std::string> source_;
  TokenStream tokens_;
  std::vector<std::unique_ptr<Node>> arena_;
};

/// Parses a unit. Throws EncodingError for non-UTF-8 bytes and SyntaxError
/// (including TokenizeError) for malformed source.
SyntaxTree parse_lossless(const SourceUnit &unit);

/// Convenience for in-memory text.
SyntaxTree parse_source(std::string path, std::string bytes);

/// Re-emits the tree. Byte-identical to the input for unmodified trees; for
/// reordered trees a newline is inserted after any item lacking one.
std::string emit(const SyntaxTree &tree);

/// 1-based line of a byte offset.
int line_of(std::string_view source, std::uint32_t offset) noexcept;

} // namespace scopeweaver::syntax
