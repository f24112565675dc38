#pragma once

// Source mutators for the fingerprint properties. Token positions come from
// the tokenizer; edits only touch trivia between tokens (layout variants) or
// exactly one token (content variants).

#include <algorithm>
#include <cctype>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "scopeweaver/fileio.hpp"
#include "scopeweaver/syntax/tokenizer.hpp"
#include "support/support.hpp"

namespace swtest {

using scopeweaver::syntax::Token;
using scopeweaver::syntax::TokenKind;

/// Twenty parseable mini-corpus programs, in a fixed order.
inline std::vector<std::string> fuzz_seeds() {
  static const char *files[] = {
      "nnlib/layers/attention.py", "nnlib/layers/conv.py",      "nnlib/layers/norm.py",
      "nnlib/layers/pooling.py",   "nnlib/layers/mlp.py",       "nnlib/layers/drop.py",
      "nnlib/layers/embed.py",     "nnlib/layers/losses.py",    "nnlib/layers/heads.py",
      "nnlib/layers/posenc.py",    "nnlib/blocks/transformer.py", "nnlib/blocks/resnet.py",
      "nnlib/blocks/mbconv.py",    "nnlib/models/resnet.py",    "nnlib/models/vit.py",
      "nnlib/models/mobilenet.py", "nnlib/common/utils.py",     "nnlib/common/math_ops.py",
      "nnlib/contrib/recursion.py", "nnlib/contrib/typed.py"};
  std::vector<std::string> out;
  for (const char *f : files)
    out.push_back(scopeweaver::read_file(minicorpus() / f));
  return out;
}

namespace detail {

inline bool structural(TokenKind k) {
  return k == TokenKind::Newline || k == TokenKind::Indent || k == TokenKind::Dedent ||
         k == TokenKind::EndMarker;
}

inline bool wordlike(TokenKind k) {
  return k == TokenKind::Name || k == TokenKind::Number || k == TokenKind::String;
}

struct Edit {
  std::size_t at;
  std::size_t erase;
  std::string insert;
};

inline std::string apply(std::string src, std::vector<Edit> edits) {
  std::sort(edits.begin(), edits.end(), [](auto &a, auto &b) { return a.at > b.at; });
  for (const auto &e : edits) {
    src.erase(e.at, e.erase);
    src.insert(e.at, e.insert);
  }
  return src;
}

} // namespace detail

/// A variant differing from `src` only in spaces between tokens, blank
/// lines, trailing blanks and comments.
inline std::string layout_variant_once(const std::string &src, std::mt19937 &rng) {
  using namespace detail;
  const auto ts = scopeweaver::syntax::tokenize(src);
  const auto &t = ts.tokens;
  std::vector<Edit> edits;
  std::vector<std::size_t> taken; // one edit per token gap
  auto free_gap = [&](std::size_t i) {
    if (std::find(taken.begin(), taken.end(), i) != taken.end())
      return false;
    taken.push_back(i);
    return true;
  };
  const int ops = 1 + static_cast<int>(rng() % 6);
  for (int n = 0, guard = 0; n < ops && guard < 1000; ++guard) {
    const std::size_t i = 1 + rng() % (t.size() - 1);
    const Token &prev = t[i - 1], &cur = t[i];
    const auto prefix = cur.prefix(src);
    const bool same_line = prev.line == cur.line && !structural(prev.kind) &&
                           !structural(cur.kind) && cur.kind != TokenKind::Comment &&
                           prefix.find('\n') == std::string_view::npos &&
                           prefix.find('\\') == std::string_view::npos;
    switch (rng() % 6) {
    case 0: // widen a gap inside a line
      if (same_line && prev.kind != TokenKind::Number && free_gap(i)) {
        edits.push_back({cur.prefix_begin, 0, std::string(1 + rng() % 3, ' ')});
        ++n;
      }
      break;
    case 1: // shrink a gap to the minimum
      if (same_line && !prefix.empty() && prev.kind != TokenKind::Number && free_gap(i)) {
        const bool need = wordlike(prev.kind) && wordlike(cur.kind);
        edits.push_back({cur.prefix_begin, prefix.size(), need ? " " : ""});
        ++n;
      }
      break;
    case 2: // blank line after a logical line
      if (prev.kind == TokenKind::Newline && free_gap(i)) {
        edits.push_back({prev.end, 0, rng() % 2 ? "\n" : "   \n"});
        ++n;
      }
      break;
    case 3: // trailing comment
      if (cur.kind == TokenKind::Newline && cur.end > cur.begin && free_gap(i)) {
        edits.push_back({cur.begin, 0, "  # fuzz " + std::to_string(rng() % 100)});
        ++n;
      }
      break;
    case 4: // drop an existing comment
      if (cur.kind == TokenKind::Comment && free_gap(i)) {
        edits.push_back({cur.begin, cur.end - cur.begin, ""});
        ++n;
      }
      break;
    case 5: // comment-only line between logical lines
      if (prev.kind == TokenKind::Newline && free_gap(i)) {
        edits.push_back({prev.end, 0, std::string(rng() % 8, ' ') + "# note\n"});
        ++n;
      }
      break;
    }
  }
  return apply(src, std::move(edits));
}

/// Same, retried until the bytes actually differ from `src`.
inline std::string layout_variant(const std::string &src, std::mt19937 &rng) {
  for (;;) {
    auto v = layout_variant_once(src, rng);
    if (v != src)
      return v;
  }
}

/// A variant with exactly one token changed: an identifier renamed, a
/// number altered, or an operator swapped.
inline std::string token_variant(const std::string &src, std::mt19937 &rng) {
  using namespace detail;
  static const std::set<std::string> keywords = {
      "False", "None",   "True",    "and",      "as",   "assert", "async",  "await",
      "break", "class",  "continue", "def",     "del",  "elif",   "else",   "except",
      "finally", "for",  "from",    "global",   "if",   "import", "in",     "is",
      "lambda", "nonlocal", "not",  "or",       "pass", "raise",  "return", "try",
      "while", "with",   "yield"};
  const auto ts = scopeweaver::syntax::tokenize(src);
  const auto &t = ts.tokens;
  for (;;) {
    const Token &cur = t[rng() % t.size()];
    const std::string text(cur.text(src));
    if (cur.kind == TokenKind::Name && !keywords.count(text))
      return apply(src, {{cur.begin, text.size(), text + "_v"}});
    if (cur.kind == TokenKind::Number && std::isdigit(static_cast<unsigned char>(text.back())))
      return text == "0" ? apply(src, {{cur.begin, 1, "1"}}) : apply(src, {{cur.end, 0, "7"}});
    if (cur.kind == TokenKind::Op && (text == "+" || text == "-" || text == "*"))
      return apply(src, {{cur.begin, 1, text == "+" ? "-" : "+"}});
  }
}

} // namespace swtest
