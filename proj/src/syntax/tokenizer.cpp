#include "scopeweaver/syntax/tokenizer.hpp"

#include <array>
#include <cstring>

#include "scopeweaver/errors.hpp"

namespace scopeweaver::syntax {

std::string_view to_string(TokenKind kind) noexcept {
  switch (kind) {
  case TokenKind::Name: return "NAME";
  case TokenKind::Number: return "NUMBER";
  case TokenKind::String: return "STRING";
  case TokenKind::Op: return "OP";
  case TokenKind::Newline: return "NEWLINE";
  case TokenKind::Indent: return "INDENT";
  case TokenKind::Dedent: return "DEDENT";
  case TokenKind::Comment: return "COMMENT";
  case TokenKind::EndMarker: return "ENDMARKER";
  }
  return "?";
}

std::string TokenStream::reconstruct() const {
  std::string out;
  out.reserve(source.size());
  for (const auto &tok : tokens) {
    out.append(tok.prefix(source));
    out.append(tok.text(source));
  }
  return out;
}

namespace {

constexpr int kTabSize = 8;

bool is_ident_start(unsigned char c) noexcept {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80;
}

bool is_ident_char(unsigned char c) noexcept {
  return is_ident_start(c) || (c >= '0' && c <= '9');
}

bool is_digit(char c) noexcept { return c >= '0' && c <= '9'; }

bool is_string_prefix(std::string_view id) noexcept {
  if (id.size() > 2)
    return false;
  std::string lower;
  for (char c : id)
    lower.push_back(static_cast<char>(c | 0x20));
  static constexpr std::array<std::string_view, 8> kPrefixes = {
      "r", "u", "b", "f", "br", "rb", "fr", "rf"};
  for (auto p : kPrefixes)
    if (lower == p)
      return true;
  return false;
}

// Longest-match operator table, three-character operators first.
constexpr std::array<std::string_view, 47> kOperators = {
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "==", "!=", "<=", ">=",
    "**",  "//",  "<<",  ">>",  "+=",  "-=", "*=", "/=", "%=", "&=", "|=",
    "^=",  "@=",  "(",   ")",   "[",   "]",  "{",  "}",  ",",  ":",  ";",
    ".",   "+",   "-",   "*",   "/",   "%",  "&",  "|",  "^",  "~",  "<",
    ">",   "=",   "@"};

class Tokenizer {
public:
  Tokenizer(std::string_view src, bool fragment)
      : src_(src), n_(src.size()), fragment_(fragment) {}

  TokenStream run() {
    if (fragment_) {
      // Behave as if inside brackets: newlines are trivia, no indentation.
      parens_.push_back({'\0', line_, 0});
      at_line_start_ = false;
    } else if (src_.substr(0, 3) == "\xEF\xBB\xBF") {
      pos_ = 3;
    }
    while (true) {
      if (at_line_start_) {
        at_line_start_ = false;
        if (parens_.empty() && !begin_line())
          break;
      }
      if (pos_ >= n_)
        break;
      step();
    }
    finish();
    return TokenStream{src_, std::move(tokens_)};
  }

private:
  [[noreturn]] void fail(const std::string &msg) const {
    throw TokenizeError(line_, static_cast<int>(pos_ - line_start_), msg);
  }

  void push(TokenKind kind, std::size_t begin, std::size_t end) {
    tokens_.push_back(Token{kind, static_cast<std::uint32_t>(last_end_),
                            static_cast<std::uint32_t>(begin),
                            static_cast<std::uint32_t>(end), tok_line_,
                            static_cast<int>(begin - tok_line_start_)});
    last_end_ = end;
    if (kind == TokenKind::Name || kind == TokenKind::Number ||
        kind == TokenKind::String || kind == TokenKind::Op)
      line_has_tokens_ = true;
  }

  void mark() {
    tok_line_ = line_;
    tok_line_start_ = line_start_;
  }

  std::size_t newline_length(std::size_t p) const noexcept {
    if (p >= n_)
      return 0;
    if (src_[p] == '\n')
      return 1;
    if (src_[p] == '\r')
      return (p + 1 < n_ && src_[p + 1] == '\n') ? 2 : 1;
    return 0;
  }

  // Measures indentation of a fresh logical line at bracket depth zero and
  // emits Indent/Dedent. Returns false at EOF.
  bool begin_line() {
    int col = 0;
    int alt = 0;
    std::size_t p = pos_;
    while (p < n_) {
      const char c = src_[p];
      if (c == ' ') {
        ++col;
        ++alt;
      } else if (c == '\t') {
        col = (col / kTabSize + 1) * kTabSize;
        ++alt;
      } else if (c == '\f') {
        col = alt = 0;
      } else {
        break;
      }
      ++p;
    }
    pos_ = p;
    if (p >= n_)
      return false;
    const char c = src_[p];
    if (c == '#' || c == '\n' || c == '\r') {
      blank_line_ = true;
      return true;
    }
    mark();
    if (col > indents_.back()) {
      if (alt <= alt_indents_.back())
        fail("inconsistent use of tabs and spaces in indentation");
      indents_.push_back(col);
      alt_indents_.push_back(alt);
      push(TokenKind::Indent, p, p);
    } else {
      while (col < indents_.back()) {
        indents_.pop_back();
        alt_indents_.pop_back();
        push(TokenKind::Dedent, p, p);
      }
      if (col != indents_.back())
        fail("unindent does not match any outer indentation level");
      if (alt != alt_indents_.back())
        fail("inconsistent use of tabs and spaces in indentation");
    }
    return true;
  }

  void step() {
    const char c = src_[pos_];
    if (c == ' ' || c == '\t' || c == '\f') {
      ++pos_;
      return;
    }
    if (c == '\\') {
      const std::size_t nl = newline_length(pos_ + 1);
      if (nl == 0) {
        if (pos_ + 1 >= n_)
          fail("unexpected EOF after line continuation");
        fail("unexpected character after line continuation character");
      }
      pos_ += 1 + nl;
      ++line_;
      line_start_ = pos_;
      if (pos_ >= n_)
        fail("unexpected EOF after line continuation");
      return;
    }
    if (c == '#') {
      mark();
      std::size_t p = pos_;
      while (p < n_ && src_[p] != '\n' && src_[p] != '\r')
        ++p;
      push(TokenKind::Comment, pos_, p);
      pos_ = p;
      return;
    }
    if (const std::size_t nl = newline_length(pos_); nl != 0) {
      if (parens_.empty() && !blank_line_) {
        mark();
        push(TokenKind::Newline, pos_, pos_ + nl);
        line_has_tokens_ = false;
      }
      pos_ += nl;
      ++line_;
      line_start_ = pos_;
      blank_line_ = false;
      at_line_start_ = true;
      return;
    }
    const auto uc = static_cast<unsigned char>(c);
    if (is_ident_start(uc)) {
      mark();
      std::size_t p = pos_;
      while (p < n_ && is_ident_char(static_cast<unsigned char>(src_[p])))
        ++p;
      if (p < n_ && (src_[p] == '"' || src_[p] == '\'') &&
          is_string_prefix(src_.substr(pos_, p - pos_))) {
        const std::size_t end = scan_string(p);
        push(TokenKind::String, pos_, end);
        pos_ = end;
        return;
      }
      push(TokenKind::Name, pos_, p);
      pos_ = p;
      return;
    }
    if (is_digit(c) || (c == '.' && pos_ + 1 < n_ && is_digit(src_[pos_ + 1]))) {
      mark();
      const std::size_t end = scan_number(pos_);
      push(TokenKind::Number, pos_, end);
      pos_ = end;
      return;
    }
    if (c == '"' || c == '\'') {
      mark();
      const std::size_t end = scan_string(pos_);
      push(TokenKind::String, pos_, end);
      pos_ = end;
      return;
    }
    for (auto op : kOperators) {
      if (src_.compare(pos_, op.size(), op) == 0) {
        mark();
        track_bracket(op);
        push(TokenKind::Op, pos_, pos_ + op.size());
        pos_ += op.size();
        return;
      }
    }
    fail(std::string("invalid character '") + c + "'");
  }

  void track_bracket(std::string_view op) {
    if (op.size() != 1)
      return;
    const char c = op[0];
    if (c == '(' || c == '[' || c == '{') {
      parens_.push_back({c, line_, static_cast<int>(pos_ - line_start_)});
    } else if (c == ')' || c == ']' || c == '}') {
      const char open = c == ')' ? '(' : c == ']' ? '[' : '{';
      if (parens_.empty() || parens_.back().c != open)
        fail(std::string("unmatched '") + c + "'");
      parens_.pop_back();
    }
  }

  std::size_t scan_digits(std::size_t p, bool (*accept)(char)) const {
    while (p < n_ && (accept(src_[p]) || src_[p] == '_'))
      ++p;
    return p;
  }

  std::size_t scan_number(std::size_t p) const {
    auto dec = [](char ch) { return is_digit(ch); };
    if (src_[p] == '0' && p + 1 < n_ &&
        std::strchr("xXoObB", src_[p + 1]) != nullptr && src_[p + 1] != '\0') {
      p += 2;
      auto alnum = [](char ch) {
        return is_digit(ch) || (ch >= 'a' && ch <= 'f') || (ch >= 'A' && ch <= 'F');
      };
      return scan_digits(p, alnum);
    }
    p = scan_digits(p, dec);
    if (p < n_ && src_[p] == '.') {
      ++p;
      p = scan_digits(p, dec);
    }
    if (p < n_ && (src_[p] == 'e' || src_[p] == 'E')) {
      std::size_t q = p + 1;
      if (q < n_ && (src_[q] == '+' || src_[q] == '-'))
        ++q;
      if (q < n_ && is_digit(src_[q]))
        p = scan_digits(q, dec);
    }
    if (p < n_ && (src_[p] == 'j' || src_[p] == 'J'))
      ++p;
    return p;
  }

  std::size_t scan_string(std::size_t p) {
    const char quote = src_[p];
    const bool triple = p + 2 < n_ && src_[p + 1] == quote && src_[p + 2] == quote;
    p += triple ? 3 : 1;
    while (true) {
      if (p >= n_) {
        fail(triple ? "unterminated triple-quoted string literal"
                    : "unterminated string literal");
      }
      const char c = src_[p];
      if (c == '\\') {
        const std::size_t nl = newline_length(p + 1);
        if (nl != 0) {
          p += 1 + nl;
          ++line_;
          line_start_ = p;
        } else {
          p += 2;
        }
        continue;
      }
      if (c == quote) {
        if (!triple)
          return p + 1;
        if (p + 2 < n_ && src_[p + 1] == quote && src_[p + 2] == quote)
          return p + 3;
        ++p;
        continue;
      }
      if (const std::size_t nl = newline_length(p); nl != 0) {
        if (!triple)
          fail("unterminated string literal");
        p += nl;
        ++line_;
        line_start_ = p;
        continue;
      }
      ++p;
    }
  }

  void finish() {
    if (fragment_ && parens_.size() == 1)
      parens_.clear();
    if (!parens_.empty()) {
      // Point at the bracket left open, not at the end of the file.
      const auto &open = parens_.back();
      throw TokenizeError(open.line, open.column,
                          std::string("'") + open.c + "' was never closed");
    }
    pos_ = n_;
    mark();
    if (line_has_tokens_) {
      push(TokenKind::Newline, n_, n_);
      line_has_tokens_ = false;
    }
    while (indents_.size() > 1) {
      indents_.pop_back();
      alt_indents_.pop_back();
      push(TokenKind::Dedent, n_, n_);
    }
    push(TokenKind::EndMarker, n_, n_);
  }

  std::string_view src_;
  std::size_t n_;
  bool fragment_;
  std::size_t pos_ = 0;
  std::size_t last_end_ = 0;
  int line_ = 1;
  std::size_t line_start_ = 0;
  int tok_line_ = 1;
  std::size_t tok_line_start_ = 0;
  bool at_line_start_ = true;
  bool blank_line_ = false;
  bool line_has_tokens_ = false;
  std::vector<int> indents_{0};
  std::vector<int> alt_indents_{0};
  struct OpenBracket {
    char c;
    int line;
    int column;
  };
  std::vector<OpenBracket> parens_;
  std::vector<Token> tokens_;
};

} // namespace

TokenStream tokenize(std::string_view source) {
  return Tokenizer(source, false).run();
}

namespace detail {

std::vector<Token> tokenize_fragment(std::string_view source, std::uint32_t begin,
                                     std::uint32_t end, int line) {
  auto stream = Tokenizer(source.substr(begin, end - begin), true).run();
  for (auto &tok : stream.tokens) {
    tok.prefix_begin += begin;
    tok.begin += begin;
    tok.end += begin;
    tok.line += line - 1;
  }
  return std::move(stream.tokens);
}

} // namespace detail

TokenStream tokenize(const SourceUnit &unit) {
  if (!is_valid_utf8(unit.bytes))
    throw EncodingError(unit.path + ": source is not valid UTF-8");
  return tokenize(std::string_view(unit.bytes));
}

} // namespace scopeweaver::syntax
