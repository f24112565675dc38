#include <algorithm>
#include <array>
#include <functional>
#include <initializer_list>

#include "scopeweaver/digest.hpp"
#include "scopeweaver/errors.hpp"
#include "scopeweaver/syntax/syntax_tree.hpp"

namespace scopeweaver::syntax {

std::string_view to_string(NodeKind kind) noexcept {
  switch (kind) {
  case NodeKind::FunctionDef: return "FunctionDef";
  case NodeKind::ClassDef: return "ClassDef";
  case NodeKind::Return: return "Return";
  case NodeKind::Delete: return "Delete";
  case NodeKind::Assign: return "Assign";
  case NodeKind::AugAssign: return "AugAssign";
  case NodeKind::AnnAssign: return "AnnAssign";
  case NodeKind::For: return "For";
  case NodeKind::While: return "While";
  case NodeKind::If: return "If";
  case NodeKind::With: return "With";
  case NodeKind::WithItem: return "WithItem";
  case NodeKind::Match: return "Match";
  case NodeKind::MatchCase: return "MatchCase";
  case NodeKind::Raise: return "Raise";
  case NodeKind::Try: return "Try";
  case NodeKind::ExceptHandler: return "ExceptHandler";
  case NodeKind::Assert: return "Assert";
  case NodeKind::Import: return "Import";
  case NodeKind::ImportFrom: return "ImportFrom";
  case NodeKind::Alias: return "Alias";
  case NodeKind::Global: return "Global";
  case NodeKind::Nonlocal: return "Nonlocal";
  case NodeKind::ExprStmt: return "ExprStmt";
  case NodeKind::Pass: return "Pass";
  case NodeKind::Break: return "Break";
  case NodeKind::Continue: return "Continue";
  case NodeKind::SimpleStatements: return "SimpleStatements";
  case NodeKind::BoolOp: return "BoolOp";
  case NodeKind::NamedExpr: return "NamedExpr";
  case NodeKind::BinOp: return "BinOp";
  case NodeKind::UnaryOp: return "UnaryOp";
  case NodeKind::Lambda: return "Lambda";
  case NodeKind::IfExp: return "IfExp";
  case NodeKind::Dict: return "Dict";
  case NodeKind::Set: return "Set";
  case NodeKind::ListComp: return "ListComp";
  case NodeKind::SetComp: return "SetComp";
  case NodeKind::DictComp: return "DictComp";
  case NodeKind::GeneratorExp: return "GeneratorExp";
  case NodeKind::Comprehension: return "Comprehension";
  case NodeKind::Await: return "Await";
  case NodeKind::Yield: return "Yield";
  case NodeKind::YieldFrom: return "YieldFrom";
  case NodeKind::Compare: return "Compare";
  case NodeKind::Call: return "Call";
  case NodeKind::Keyword: return "Keyword";
  case NodeKind::Constant: return "Constant";
  case NodeKind::Str: return "Str";
  case NodeKind::Attribute: return "Attribute";
  case NodeKind::Subscript: return "Subscript";
  case NodeKind::Starred: return "Starred";
  case NodeKind::DoubleStarred: return "DoubleStarred";
  case NodeKind::Name: return "Name";
  case NodeKind::Identifier: return "Identifier";
  case NodeKind::List: return "List";
  case NodeKind::Tuple: return "Tuple";
  case NodeKind::Slice: return "Slice";
  case NodeKind::Arguments: return "Arguments";
  case NodeKind::Arg: return "Arg";
  case NodeKind::MatchValue: return "MatchValue";
  case NodeKind::MatchSingleton: return "MatchSingleton";
  case NodeKind::MatchSequence: return "MatchSequence";
  case NodeKind::MatchMapping: return "MatchMapping";
  case NodeKind::MatchClass: return "MatchClass";
  case NodeKind::MatchStar: return "MatchStar";
  case NodeKind::MatchAs: return "MatchAs";
  case NodeKind::MatchOr: return "MatchOr";
  }
  return "?";
}

int line_of(std::string_view source, std::uint32_t offset) noexcept {
  offset = std::min<std::uint32_t>(offset, static_cast<std::uint32_t>(source.size()));
  return 1 + static_cast<int>(std::count(source.begin(), source.begin() + offset, '\n'));
}

namespace {

constexpr std::array<std::string_view, 35> kKeywords = {
    "False", "None",   "True",    "and",      "as",       "assert", "async",
    "await", "break",  "class",   "continue", "def",      "del",    "elif",
    "else",  "except", "finally", "for",      "from",     "global", "if",
    "import", "in",    "is",      "lambda",   "nonlocal", "not",    "or",
    "pass",  "raise",  "return",  "try",      "while",    "with",   "yield"};

bool is_keyword(std::string_view s) noexcept {
  return std::find(kKeywords.begin(), kKeywords.end(), s) != kKeywords.end();
}

constexpr std::array<std::string_view, 13> kAugAssign = {
    "+=", "-=", "*=", "/=", "//=", "%=", "@=", "&=", "|=", "^=", ">>=", "<<=", "**="};

std::vector<Token> significant(const std::vector<Token> &tokens) {
  std::vector<Token> out;
  out.reserve(tokens.size());
  for (const auto &t : tokens)
    if (t.kind != TokenKind::Comment)
      out.push_back(t);
  return out;
}

} // namespace

class Parser {
public:
  Parser(std::string_view src, std::vector<Token> toks,
         std::vector<std::unique_ptr<Node>> &arena)
      : src_(src), toks_(std::move(toks)), arena_(arena) {}

  void parse_module(SyntaxTree &tree) {
    std::uint32_t prev_end = tree.header ? tree.header->end : 0;
    std::uint32_t index = 0;
    while (cur().kind != TokenKind::EndMarker) {
      if (cur().kind == TokenKind::Indent)
        fail("unexpected indent");
      if (cur().kind == TokenKind::Dedent)
        fail("unexpected unindent");
      auto stmts = parse_statement();
      Node *item = stmts.front();
      if (stmts.size() > 1) {
        item = make(NodeKind::SimpleStatements, stmts.front()->begin, stmts.back()->end);
        for (Node *s : stmts)
          adopt(item, s, Role::Body);
      }
      tree.top_level.push_back(TopLevelItem{{prev_end, last_newline_end_}, item, index++});
      prev_end = last_newline_end_;
    }
    tree.end_trivia = {prev_end, static_cast<std::uint32_t>(src_.size())};
  }

  // Entry point for f-string replacement fields.
  Node *parse_fragment() {
    Node *e = is_kw("yield") ? parse_yield_expr() : parse_star_expressions();
    if (cur().kind == TokenKind::Newline)
      advance();
    if (cur().kind != TokenKind::EndMarker)
      fail("f-string: invalid syntax");
    return e;
  }

private:
  // ---- token helpers -------------------------------------------------------

  const Token &cur() const { return toks_[pos_]; }
  const Token &peek(std::size_t k) const {
    return toks_[std::min(pos_ + k, toks_.size() - 1)];
  }
  std::string_view tx(const Token &t) const { return t.text(src_); }

  bool is_op(std::string_view s, std::size_t k = 0) const {
    const Token &t = peek(k);
    return t.kind == TokenKind::Op && tx(t) == s;
  }
  bool is_kw(std::string_view s, std::size_t k = 0) const {
    const Token &t = peek(k);
    return t.kind == TokenKind::Name && tx(t) == s;
  }
  bool is_name(std::size_t k = 0) const {
    const Token &t = peek(k);
    return t.kind == TokenKind::Name && !is_keyword(tx(t));
  }

  const Token &advance() {
    const Token &t = toks_[pos_];
    switch (t.kind) {
    case TokenKind::Name:
    case TokenKind::Number:
    case TokenKind::String:
    case TokenKind::Op:
      last_sig_end_ = t.end;
      break;
    case TokenKind::Newline:
      last_newline_end_ = t.end;
      break;
    default:
      break;
    }
    if (pos_ + 1 < toks_.size())
      ++pos_;
    return t;
  }

  [[noreturn]] void fail(const std::string &msg) const {
    const Token &t = cur();
    throw SyntaxError(t.line, t.column, msg);
  }
  [[noreturn]] void fail_at(const Node *n, const std::string &msg) const {
    const int line = line_of(src_, n->begin);
    const auto line_begin = src_.rfind('\n', n->begin == 0 ? 0 : n->begin - 1);
    const int col = static_cast<int>(
        line_begin == std::string_view::npos || n->begin == 0 ? n->begin
                                                              : n->begin - line_begin - 1);
    throw SyntaxError(line, col, msg);
  }

  void expect_op(std::string_view s) {
    if (!is_op(s))
      fail("expected '" + std::string(s) + "'");
    advance();
  }
  void expect_kw(std::string_view s) {
    if (!is_kw(s))
      fail("expected '" + std::string(s) + "'");
    advance();
  }
  const Token &expect_name() {
    if (!is_name())
      fail("expected identifier");
    return advance();
  }
  void expect_newline() {
    if (cur().kind != TokenKind::Newline)
      fail("invalid syntax");
    advance();
  }

  Node *make(NodeKind kind, std::uint32_t begin, std::uint32_t end = 0) {
    arena_.push_back(std::make_unique<Node>());
    Node *n = arena_.back().get();
    n->kind = kind;
    n->begin = begin;
    n->end = end;
    return n;
  }
  static Node *adopt(Node *parent, Node *child, Role role) {
    child->role = role;
    parent->children.push_back(child);
    return child;
  }
  Node *finish(Node *n) {
    n->end = last_sig_end_;
    return n;
  }

  struct Mark {
    std::size_t pos;
    std::uint32_t sig;
    std::uint32_t nl;
  };
  Mark save() const { return {pos_, last_sig_end_, last_newline_end_}; }
  void restore(const Mark &m) {
    pos_ = m.pos;
    last_sig_end_ = m.sig;
    last_newline_end_ = m.nl;
  }

  bool starts_expression(std::size_t k = 0) const {
    const Token &t = peek(k);
    switch (t.kind) {
    case TokenKind::Number:
    case TokenKind::String:
      return true;
    case TokenKind::Name: {
      const auto s = tx(t);
      return !is_keyword(s) || s == "lambda" || s == "not" || s == "await" ||
             s == "None" || s == "True" || s == "False";
    }
    case TokenKind::Op: {
      const auto s = tx(t);
      return s == "(" || s == "[" || s == "{" || s == "-" || s == "+" || s == "~" ||
             s == "*" || s == "...";
    }
    default:
      return false;
    }
  }

  bool at_comprehension() const {
    return is_kw("for") || (is_kw("async") && is_kw("for", 1));
  }

  // ---- statements ----------------------------------------------------------

  std::vector<Node *> parse_statement() {
    if (is_op("@"))
      return {parse_decorated()};
    if (cur().kind == TokenKind::Name) {
      const auto word = tx(cur());
      const std::uint32_t begin = cur().begin;
      if (word == "def")
        return {parse_funcdef({}, begin, false)};
      if (word == "class")
        return {parse_classdef({}, begin)};
      if (word == "if")
        return {parse_if()};
      if (word == "while")
        return {parse_while()};
      if (word == "for")
        return {parse_for(begin, false)};
      if (word == "try")
        return {parse_try()};
      if (word == "with")
        return {parse_with(begin, false)};
      if (word == "async") {
        advance();
        if (is_kw("def"))
          return {parse_funcdef({}, begin, true)};
        if (is_kw("for"))
          return {parse_for(begin, true)};
        if (is_kw("with"))
          return {parse_with(begin, true)};
        fail("invalid syntax");
      }
      if (word == "match")
        if (Node *m = try_parse_match())
          return {m};
    }
    return parse_simple_stmts();
  }

  void parse_block(Node *parent, Role role) {
    expect_op(":");
    if (cur().kind == TokenKind::Newline) {
      advance();
      if (cur().kind != TokenKind::Indent)
        fail("expected an indented block");
      advance();
      while (cur().kind != TokenKind::Dedent && cur().kind != TokenKind::EndMarker) {
        if (cur().kind == TokenKind::Indent)
          fail("unexpected indent");
        for (Node *s : parse_statement())
          adopt(parent, s, role);
      }
      if (cur().kind == TokenKind::Dedent)
        advance();
    } else {
      for (Node *s : parse_simple_stmts())
        adopt(parent, s, role);
    }
  }

  Node *parse_decorated() {
    const std::uint32_t begin = cur().begin;
    std::vector<Node *> decorators;
    while (is_op("@")) {
      advance();
      decorators.push_back(parse_named_expression());
      expect_newline();
    }
    if (is_kw("def"))
      return parse_funcdef(decorators, begin, false);
    if (is_kw("async") && is_kw("def", 1)) {
      advance();
      return parse_funcdef(decorators, begin, true);
    }
    if (is_kw("class"))
      return parse_classdef(decorators, begin);
    fail("expected 'def' or 'class' after decorator");
  }

  Node *parse_funcdef(const std::vector<Node *> &decorators, std::uint32_t begin,
                      bool is_async) {
    expect_kw("def");
    Node *node = make(NodeKind::FunctionDef, begin);
    node->value = std::string(tx(expect_name()));
    if (is_async)
      node->flags |= flag::kAsync;
    for (Node *d : decorators)
      adopt(node, d, Role::Decorator);
    expect_op("(");
    adopt(node, parse_params(")", true), Role::Params);
    expect_op(")");
    if (is_op("->")) {
      advance();
      adopt(node, parse_expression(), Role::Returns);
    }
    parse_block(node, Role::Body);
    return finish(node);
  }

  Node *parse_params(std::string_view closing, bool annotations) {
    Node *args = make(NodeKind::Arguments, cur().begin, cur().begin);
    bool seen_star = false;
    bool seen_default = false;
    bool any = false;
    while (!is_op(closing)) {
      if (is_op("/")) {
        if (!any || seen_star)
          fail("invalid use of '/' in parameters");
        for (Node *a : args->children)
          if (a->arg_kind() == ArgKind::Normal)
            a->flags = static_cast<std::uint32_t>(ArgKind::PositionalOnly);
        advance();
      } else if (is_op("*")) {
        advance();
        if (seen_star)
          fail("* argument may appear only once");
        seen_star = true;
        if (!is_op(",") && !is_op(closing))
          adopt(args, parse_param(ArgKind::VarArgs, annotations), Role::Param);
      } else if (is_op("**")) {
        advance();
        adopt(args, parse_param(ArgKind::KwArgs, annotations), Role::Param);
      } else {
        Node *arg = parse_param(seen_star ? ArgKind::KeywordOnly : ArgKind::Normal,
                                annotations);
        adopt(args, arg, Role::Param);
        if (is_op("=")) {
          advance();
          adopt(arg, parse_expression(), Role::Default);
          arg->end = last_sig_end_;
          if (!seen_star)
            seen_default = true;
        } else if (seen_default && !seen_star) {
          fail("non-default argument follows default argument");
        }
      }
      any = true;
      if (!is_op(","))
        break;
      advance();
    }
    if (!args->children.empty()) {
      args->begin = args->children.front()->begin;
      args->end = last_sig_end_;
    }
    return args;
  }

  Node *parse_param(ArgKind kind, bool annotations) {
    const Token &t = expect_name();
    Node *arg = make(NodeKind::Arg, t.begin, t.end);
    arg->value = std::string(tx(t));
    arg->flags = static_cast<std::uint32_t>(kind);
    if (annotations && is_op(":")) {
      advance();
      adopt(arg, kind == ArgKind::VarArgs ? parse_star_expression() : parse_expression(),
            Role::Annotation);
      arg->end = last_sig_end_;
    }
    return arg;
  }

  Node *parse_classdef(const std::vector<Node *> &decorators, std::uint32_t begin) {
    expect_kw("class");
    Node *node = make(NodeKind::ClassDef, begin);
    node->value = std::string(tx(expect_name()));
    for (Node *d : decorators)
      adopt(node, d, Role::Decorator);
    if (is_op("(")) {
      advance();
      parse_call_arguments(node, Role::Base);
      expect_op(")");
    }
    parse_block(node, Role::Body);
    return finish(node);
  }

  Node *parse_if() {
    const std::uint32_t begin = cur().begin;
    advance(); // 'if' or 'elif'
    Node *node = make(NodeKind::If, begin);
    adopt(node, parse_named_expression(), Role::Test);
    parse_block(node, Role::Body);
    if (is_kw("elif")) {
      adopt(node, parse_if(), Role::OrElse);
    } else if (is_kw("else")) {
      advance();
      parse_block(node, Role::OrElse);
    }
    return finish(node);
  }

  Node *parse_while() {
    const std::uint32_t begin = cur().begin;
    advance();
    Node *node = make(NodeKind::While, begin);
    adopt(node, parse_named_expression(), Role::Test);
    parse_block(node, Role::Body);
    if (is_kw("else")) {
      advance();
      parse_block(node, Role::OrElse);
    }
    return finish(node);
  }

  Node *parse_for(std::uint32_t begin, bool is_async) {
    expect_kw("for");
    Node *node = make(NodeKind::For, begin);
    if (is_async)
      node->flags |= flag::kAsync;
    adopt(node, parse_star_targets(), Role::Target);
    expect_kw("in");
    adopt(node, parse_star_expressions(), Role::Iter);
    parse_block(node, Role::Body);
    if (is_kw("else")) {
      advance();
      parse_block(node, Role::OrElse);
    }
    return finish(node);
  }

  Node *parse_try() {
    const std::uint32_t begin = cur().begin;
    advance();
    Node *node = make(NodeKind::Try, begin);
    parse_block(node, Role::Body);
    bool handlers = false;
    while (is_kw("except")) {
      Node *h = make(NodeKind::ExceptHandler, cur().begin);
      advance();
      if (is_op("*")) {
        h->flags |= flag::kExceptStar;
        advance();
      }
      if (!is_op(":")) {
        adopt(h, parse_expression(), Role::Type);
        if (is_kw("as")) {
          advance();
          h->value = std::string(tx(expect_name()));
        }
      }
      parse_block(h, Role::Body);
      adopt(node, finish(h), Role::Handler);
      handlers = true;
    }
    if (is_kw("else")) {
      if (!handlers)
        fail("invalid syntax");
      advance();
      parse_block(node, Role::OrElse);
    }
    if (is_kw("finally")) {
      advance();
      parse_block(node, Role::FinalBody);
    } else if (!handlers) {
      fail("expected 'except' or 'finally' block");
    }
    return finish(node);
  }

  Node *parse_with_item() {
    const std::uint32_t begin = cur().begin;
    Node *item = make(NodeKind::WithItem, begin);
    adopt(item, parse_expression(), Role::Value);
    if (is_kw("as")) {
      advance();
      Node *t = parse_target_element();
      set_ctx(t, Ctx::Store);
      adopt(item, t, Role::Target);
    }
    return finish(item);
  }

  Node *parse_with(std::uint32_t begin, bool is_async) {
    expect_kw("with");
    Node *node = make(NodeKind::With, begin);
    if (is_async)
      node->flags |= flag::kAsync;
    bool done = false;
    if (is_op("(")) {
      const Mark m = save();
      try {
        advance();
        std::vector<Node *> items;
        while (true) {
          items.push_back(parse_with_item());
          if (!is_op(","))
            break;
          advance();
          if (is_op(")"))
            break;
        }
        expect_op(")");
        if (!is_op(":"))
          fail("invalid syntax");
        for (Node *i : items)
          adopt(node, i, Role::Item);
        done = true;
      } catch (const SyntaxError &) {
        restore(m);
      }
    }
    if (!done) {
      while (true) {
        adopt(node, parse_with_item(), Role::Item);
        if (!is_op(","))
          break;
        advance();
      }
    }
    parse_block(node, Role::Body);
    return finish(node);
  }

  // ---- match statement -----------------------------------------------------

  Node *try_parse_match() {
    const Mark m = save();
    const std::uint32_t begin = cur().begin;
    Node *node = make(NodeKind::Match, begin);
    try {
      advance();
      if (!starts_expression())
        fail("invalid syntax");
      adopt(node, parse_star_named_expressions(), Role::Subject);
      expect_op(":");
      expect_newline();
      if (cur().kind != TokenKind::Indent || !is_kw("case", 1))
        fail("invalid syntax");
    } catch (const SyntaxError &) {
      restore(m);
      return nullptr;
    }
    advance(); // INDENT
    while (is_kw("case")) {
      Node *c = make(NodeKind::MatchCase, cur().begin);
      advance();
      adopt(c, parse_patterns(), Role::Pattern);
      if (is_kw("if")) {
        advance();
        adopt(c, parse_named_expression(), Role::Guard);
      }
      parse_block(c, Role::Body);
      adopt(node, finish(c), Role::Case);
    }
    if (cur().kind != TokenKind::Dedent)
      fail("expected 'case' block");
    advance();
    return finish(node);
  }

  Node *parse_patterns() {
    const std::uint32_t begin = cur().begin;
    Node *first = parse_maybe_star_pattern();
    if (!is_op(","))
      return first;
    Node *seq = make(NodeKind::MatchSequence, begin);
    adopt(seq, first, Role::Pattern);
    while (is_op(",")) {
      advance();
      if (is_op(":") || is_kw("if"))
        break;
      adopt(seq, parse_maybe_star_pattern(), Role::Pattern);
    }
    return finish(seq);
  }

  Node *parse_maybe_star_pattern() {
    if (is_op("*")) {
      Node *star = make(NodeKind::MatchStar, cur().begin);
      advance();
      const auto name = tx(expect_name());
      if (name != "_")
        star->value = std::string(name);
      return finish(star);
    }
    return parse_pattern();
  }

  Node *parse_pattern() {
    const std::uint32_t begin = cur().begin;
    Node *p = parse_or_pattern();
    if (is_kw("as")) {
      advance();
      Node *as = make(NodeKind::MatchAs, begin);
      as->value = std::string(tx(expect_name()));
      adopt(as, p, Role::Pattern);
      return finish(as);
    }
    return p;
  }

  Node *parse_or_pattern() {
    const std::uint32_t begin = cur().begin;
    Node *first = parse_closed_pattern();
    if (!is_op("|"))
      return first;
    Node *alt = make(NodeKind::MatchOr, begin);
    adopt(alt, first, Role::Pattern);
    while (is_op("|")) {
      advance();
      adopt(alt, parse_closed_pattern(), Role::Pattern);
    }
    return finish(alt);
  }

  Node *parse_dotted_value() {
    const Token &t = expect_name();
    Node *e = make(NodeKind::Name, t.begin, t.end);
    e->value = std::string(tx(t));
    while (is_op(".")) {
      advance();
      const Token &a = expect_name();
      Node *attr = make(NodeKind::Attribute, e->begin, a.end);
      attr->value = std::string(tx(a));
      adopt(attr, e, Role::Value);
      e = attr;
    }
    return e;
  }

  Node *parse_closed_pattern() {
    const std::uint32_t begin = cur().begin;
    const Token &t = cur();
    if (t.kind == TokenKind::Number || is_op("-")) {
      Node *v = make(NodeKind::MatchValue, begin);
      adopt(v, parse_sum(), Role::Value);
      return finish(v);
    }
    if (t.kind == TokenKind::String) {
      Node *v = make(NodeKind::MatchValue, begin);
      adopt(v, parse_strings(), Role::Value);
      return finish(v);
    }
    if (is_kw("None") || is_kw("True") || is_kw("False")) {
      Node *v = make(NodeKind::MatchSingleton, begin);
      v->value = std::string(tx(advance()));
      return finish(v);
    }
    if (is_name()) {
      const bool dotted = is_op(".", 1);
      if (!dotted && !is_op("(", 1)) {
        Node *cap = make(NodeKind::MatchAs, begin);
        const auto name = tx(advance());
        if (name != "_")
          cap->value = std::string(name);
        return finish(cap);
      }
      Node *value = parse_dotted_value();
      if (is_op("(")) {
        Node *cls = make(NodeKind::MatchClass, begin);
        adopt(cls, value, Role::Func);
        advance();
        while (!is_op(")")) {
          if (is_name() && is_op("=", 1)) {
            Node *kw = make(NodeKind::Keyword, cur().begin);
            kw->value = std::string(tx(advance()));
            advance();
            adopt(kw, parse_pattern(), Role::Pattern);
            adopt(cls, finish(kw), Role::Keyword);
          } else {
            adopt(cls, parse_pattern(), Role::Pattern);
          }
          if (!is_op(","))
            break;
          advance();
        }
        expect_op(")");
        return finish(cls);
      }
      Node *v = make(NodeKind::MatchValue, begin);
      adopt(v, value, Role::Value);
      return finish(v);
    }
    if (is_op("(") || is_op("[")) {
      const bool paren = is_op("(");
      const std::string_view close = paren ? ")" : "]";
      advance();
      Node *seq = make(NodeKind::MatchSequence, begin);
      if (is_op(close)) {
        advance();
        return finish(seq);
      }
      Node *first = parse_maybe_star_pattern();
      if (paren && is_op(")") && first->kind != NodeKind::MatchStar) {
        advance();
        return first; // group pattern
      }
      adopt(seq, first, Role::Pattern);
      while (is_op(",")) {
        advance();
        if (is_op(close))
          break;
        adopt(seq, parse_maybe_star_pattern(), Role::Pattern);
      }
      expect_op(close);
      return finish(seq);
    }
    if (is_op("{")) {
      advance();
      Node *map = make(NodeKind::MatchMapping, begin);
      while (!is_op("}")) {
        if (is_op("**")) {
          advance();
          map->value = std::string(tx(expect_name()));
        } else {
          Node *key;
          if (cur().kind == TokenKind::String)
            key = parse_strings();
          else if (is_name())
            key = parse_dotted_value();
          else if (is_kw("None") || is_kw("True") || is_kw("False"))
            key = parse_atom();
          else
            key = parse_sum();
          adopt(map, key, Role::Key);
          expect_op(":");
          adopt(map, parse_pattern(), Role::Pattern);
        }
        if (!is_op(","))
          break;
        advance();
      }
      expect_op("}");
      return finish(map);
    }
    fail("invalid pattern");
  }

  // ---- simple statements ---------------------------------------------------

  bool at_simple_end() const {
    return cur().kind == TokenKind::Newline || cur().kind == TokenKind::EndMarker ||
           is_op(";");
  }

  std::vector<Node *> parse_simple_stmts() {
    std::vector<Node *> out;
    out.push_back(parse_small_stmt());
    while (is_op(";")) {
      advance();
      if (cur().kind == TokenKind::Newline)
        break;
      out.push_back(parse_small_stmt());
    }
    expect_newline();
    return out;
  }

  Node *parse_small_stmt() {
    const std::uint32_t begin = cur().begin;
    if (cur().kind == TokenKind::Name) {
      const auto word = tx(cur());
      if (word == "pass" || word == "break" || word == "continue") {
        const NodeKind kind = word == "pass"    ? NodeKind::Pass
                              : word == "break" ? NodeKind::Break
                                                : NodeKind::Continue;
        advance();
        return finish(make(kind, begin));
      }
      if (word == "return") {
        advance();
        Node *node = make(NodeKind::Return, begin);
        if (!at_simple_end())
          adopt(node, parse_star_expressions(), Role::Value);
        return finish(node);
      }
      if (word == "raise") {
        advance();
        Node *node = make(NodeKind::Raise, begin);
        if (!at_simple_end()) {
          adopt(node, parse_expression(), Role::Value);
          if (is_kw("from")) {
            advance();
            adopt(node, parse_expression(), Role::Cause);
          }
        }
        return finish(node);
      }
      if (word == "global" || word == "nonlocal") {
        advance();
        Node *node = make(word == "global" ? NodeKind::Global : NodeKind::Nonlocal, begin);
        while (true) {
          const Token &t = expect_name();
          Node *id = make(NodeKind::Identifier, t.begin, t.end);
          id->value = std::string(tx(t));
          adopt(node, id, Role::Target);
          if (!is_op(","))
            break;
          advance();
        }
        return finish(node);
      }
      if (word == "del") {
        advance();
        Node *node = make(NodeKind::Delete, begin);
        while (true) {
          Node *t = parse_target_element();
          set_ctx(t, Ctx::Del);
          adopt(node, t, Role::Target);
          if (!is_op(","))
            break;
          advance();
          if (at_simple_end())
            break;
        }
        return finish(node);
      }
      if (word == "assert") {
        advance();
        Node *node = make(NodeKind::Assert, begin);
        adopt(node, parse_expression(), Role::Test);
        if (is_op(",")) {
          advance();
          adopt(node, parse_expression(), Role::Msg);
        }
        return finish(node);
      }
      if (word == "import")
        return parse_import();
      if (word == "from")
        return parse_from_import();
    }
    return parse_expr_or_assign();
  }

  std::string parse_dotted_name() {
    std::string name(tx(expect_name()));
    while (is_op(".")) {
      advance();
      name.push_back('.');
      name.append(tx(expect_name()));
    }
    return name;
  }

  Node *parse_alias(bool dotted) {
    const std::uint32_t begin = cur().begin;
    Node *a = make(NodeKind::Alias, begin);
    a->value = dotted ? parse_dotted_name() : std::string(tx(expect_name()));
    if (is_kw("as")) {
      advance();
      a->extra = std::string(tx(expect_name()));
    }
    return finish(a);
  }

  Node *parse_import() {
    Node *node = make(NodeKind::Import, cur().begin);
    advance();
    while (true) {
      adopt(node, parse_alias(true), Role::Item);
      if (!is_op(","))
        break;
      advance();
    }
    return finish(node);
  }

  Node *parse_from_import() {
    Node *node = make(NodeKind::ImportFrom, cur().begin);
    advance();
    std::uint32_t level = 0;
    while (is_op(".") || is_op("...")) {
      level += static_cast<std::uint32_t>(tx(cur()).size());
      advance();
    }
    if (!is_kw("import"))
      node->value = parse_dotted_name();
    else if (level == 0)
      fail("invalid syntax");
    node->flags = level;
    expect_kw("import");
    if (is_op("*")) {
      Node *a = make(NodeKind::Alias, cur().begin, cur().end);
      a->value = "*";
      advance();
      adopt(node, a, Role::Item);
      return finish(node);
    }
    const bool paren = is_op("(");
    if (paren)
      advance();
    while (true) {
      adopt(node, parse_alias(false), Role::Item);
      if (!is_op(","))
        break;
      advance();
      if (paren && is_op(")"))
        break;
      if (!paren && at_simple_end())
        fail("trailing comma not allowed without surrounding parentheses");
    }
    if (paren)
      expect_op(")");
    return finish(node);
  }

  Node *parse_expr_or_assign() {
    const std::uint32_t begin = cur().begin;
    Node *first = is_kw("yield") ? parse_yield_expr() : parse_star_expressions();
    auto single_target = [&](Node *t) {
      if (t->kind != NodeKind::Name && t->kind != NodeKind::Attribute &&
          t->kind != NodeKind::Subscript)
        fail_at(t, "illegal target for annotation or augmented assignment");
    };
    if (is_op(":")) {
      single_target(first);
      set_ctx(first, Ctx::Store);
      advance();
      Node *node = make(NodeKind::AnnAssign, begin);
      adopt(node, first, Role::Target);
      adopt(node, parse_expression(), Role::Annotation);
      if (is_op("=")) {
        advance();
        adopt(node, is_kw("yield") ? parse_yield_expr() : parse_star_expressions(),
              Role::Value);
      }
      return finish(node);
    }
    if (cur().kind == TokenKind::Op &&
        std::find(kAugAssign.begin(), kAugAssign.end(), tx(cur())) != kAugAssign.end()) {
      single_target(first);
      set_ctx(first, Ctx::Store);
      Node *node = make(NodeKind::AugAssign, begin);
      node->value = std::string(tx(advance()));
      adopt(node, first, Role::Target);
      adopt(node, is_kw("yield") ? parse_yield_expr() : parse_star_expressions(),
            Role::Value);
      return finish(node);
    }
    if (is_op("=")) {
      std::vector<Node *> parts{first};
      while (is_op("=")) {
        advance();
        parts.push_back(is_kw("yield") ? parse_yield_expr() : parse_star_expressions());
      }
      Node *node = make(NodeKind::Assign, begin);
      for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        set_ctx(parts[i], Ctx::Store);
        adopt(node, parts[i], Role::Target);
      }
      adopt(node, parts.back(), Role::Value);
      return finish(node);
    }
    Node *node = make(NodeKind::ExprStmt, begin);
    adopt(node, first, Role::Value);
    return finish(node);
  }

  void set_ctx(Node *n, Ctx ctx) {
    switch (n->kind) {
    case NodeKind::Name:
    case NodeKind::Attribute:
    case NodeKind::Subscript:
      n->flags = static_cast<std::uint32_t>(ctx);
      return;
    case NodeKind::Tuple:
    case NodeKind::List:
      n->flags = static_cast<std::uint32_t>(ctx);
      for (Node *c : n->children)
        set_ctx(c, ctx);
      return;
    case NodeKind::Starred:
      n->flags = static_cast<std::uint32_t>(ctx);
      for (Node *c : n->children)
        set_ctx(c, ctx);
      return;
    default:
      fail_at(n, std::string("cannot ") + (ctx == Ctx::Del ? "delete" : "assign to") +
                     " " + std::string(to_string(n->kind)));
    }
  }

  Node *parse_star_targets() {
    const std::uint32_t begin = cur().begin;
    Node *first = parse_target_element();
    if (!is_op(",")) {
      set_ctx(first, Ctx::Store);
      return first;
    }
    Node *tuple = make(NodeKind::Tuple, begin);
    adopt(tuple, first, Role::Elt);
    while (is_op(",")) {
      advance();
      if (!starts_expression())
        break;
      adopt(tuple, parse_target_element(), Role::Elt);
    }
    finish(tuple);
    set_ctx(tuple, Ctx::Store);
    return tuple;
  }

  Node *parse_target_element() {
    if (is_op("*")) {
      Node *s = make(NodeKind::Starred, cur().begin);
      advance();
      adopt(s, parse_bitwise_or(), Role::Value);
      return finish(s);
    }
    return parse_bitwise_or();
  }

  // ---- expressions ---------------------------------------------------------

  Node *parse_star_expressions() {
    const std::uint32_t begin = cur().begin;
    Node *first = parse_star_expression();
    if (!is_op(","))
      return first;
    Node *tuple = make(NodeKind::Tuple, begin);
    adopt(tuple, first, Role::Elt);
    while (is_op(",")) {
      advance();
      if (!starts_expression())
        break;
      adopt(tuple, parse_star_expression(), Role::Elt);
    }
    return finish(tuple);
  }

  Node *parse_star_named_expressions() {
    const std::uint32_t begin = cur().begin;
    Node *first = parse_star_named_expression();
    if (!is_op(","))
      return first;
    Node *tuple = make(NodeKind::Tuple, begin);
    adopt(tuple, first, Role::Elt);
    while (is_op(",")) {
      advance();
      if (!starts_expression())
        break;
      adopt(tuple, parse_star_named_expression(), Role::Elt);
    }
    return finish(tuple);
  }

  Node *parse_star_expression() {
    if (is_op("*")) {
      Node *s = make(NodeKind::Starred, cur().begin);
      advance();
      adopt(s, parse_bitwise_or(), Role::Value);
      return finish(s);
    }
    return parse_expression();
  }

  Node *parse_star_named_expression() {
    if (is_op("*"))
      return parse_star_expression();
    return parse_named_expression();
  }

  Node *parse_named_expression() {
    if (is_name() && is_op(":=", 1)) {
      const Token &t = advance();
      Node *target = make(NodeKind::Name, t.begin, t.end);
      target->value = std::string(tx(t));
      target->flags = static_cast<std::uint32_t>(Ctx::Store);
      advance();
      Node *node = make(NodeKind::NamedExpr, t.begin);
      adopt(node, target, Role::Target);
      adopt(node, parse_expression(), Role::Value);
      return finish(node);
    }
    return parse_expression();
  }

  Node *parse_expression() {
    if (is_kw("lambda"))
      return parse_lambda();
    const std::uint32_t begin = cur().begin;
    Node *body = parse_disjunction();
    if (!is_kw("if"))
      return body;
    advance();
    Node *node = make(NodeKind::IfExp, begin);
    adopt(node, body, Role::Body);
    adopt(node, parse_disjunction(), Role::Test);
    expect_kw("else");
    adopt(node, parse_expression(), Role::OrElse);
    return finish(node);
  }

  Node *parse_lambda() {
    Node *node = make(NodeKind::Lambda, cur().begin);
    advance();
    adopt(node, parse_params(":", false), Role::Params);
    expect_op(":");
    adopt(node, parse_expression(), Role::Body);
    return finish(node);
  }

  Node *parse_bool_chain(std::string_view op, Node *(Parser::*next)()) {
    const std::uint32_t begin = cur().begin;
    Node *first = (this->*next)();
    if (!is_kw(op))
      return first;
    Node *node = make(NodeKind::BoolOp, begin);
    node->value = std::string(op);
    adopt(node, first, Role::Operand);
    while (is_kw(op)) {
      advance();
      adopt(node, (this->*next)(), Role::Operand);
    }
    return finish(node);
  }

  Node *parse_disjunction() { return parse_bool_chain("or", &Parser::parse_conjunction); }
  Node *parse_conjunction() { return parse_bool_chain("and", &Parser::parse_inversion); }

  Node *parse_inversion() {
    if (is_kw("not")) {
      Node *node = make(NodeKind::UnaryOp, cur().begin);
      node->value = "not";
      advance();
      adopt(node, parse_inversion(), Role::Operand);
      return finish(node);
    }
    return parse_comparison();
  }

  bool at_compare_op() const {
    if (cur().kind == TokenKind::Op) {
      const auto s = tx(cur());
      return s == "==" || s == "!=" || s == "<" || s == ">" || s == "<=" || s == ">=";
    }
    return is_kw("in") || is_kw("is") || (is_kw("not") && is_kw("in", 1));
  }

  Node *parse_comparison() {
    const std::uint32_t begin = cur().begin;
    Node *first = parse_bitwise_or();
    if (!at_compare_op())
      return first;
    Node *node = make(NodeKind::Compare, begin);
    adopt(node, first, Role::Operand);
    while (at_compare_op()) {
      if (is_kw("not") || (is_kw("is") && is_kw("not", 1)))
        advance();
      advance();
      adopt(node, parse_bitwise_or(), Role::Operand);
    }
    return finish(node);
  }

  Node *parse_binary(std::initializer_list<std::string_view> ops, Node *(Parser::*next)()) {
    const std::uint32_t begin = cur().begin;
    Node *left = (this->*next)();
    while (cur().kind == TokenKind::Op &&
           std::find(ops.begin(), ops.end(), tx(cur())) != ops.end()) {
      Node *node = make(NodeKind::BinOp, begin);
      node->value = std::string(tx(advance()));
      adopt(node, left, Role::Operand);
      adopt(node, (this->*next)(), Role::Operand);
      left = finish(node);
    }
    return left;
  }

  Node *parse_bitwise_or() { return parse_binary({"|"}, &Parser::parse_bitwise_xor); }
  Node *parse_bitwise_xor() { return parse_binary({"^"}, &Parser::parse_bitwise_and); }
  Node *parse_bitwise_and() { return parse_binary({"&"}, &Parser::parse_shift); }
  Node *parse_shift() { return parse_binary({"<<", ">>"}, &Parser::parse_sum); }
  Node *parse_sum() { return parse_binary({"+", "-"}, &Parser::parse_term); }
  Node *parse_term() {
    return parse_binary({"*", "/", "//", "%", "@"}, &Parser::parse_factor);
  }

  Node *parse_factor() {
    if (is_op("+") || is_op("-") || is_op("~")) {
      Node *node = make(NodeKind::UnaryOp, cur().begin);
      node->value = std::string(tx(advance()));
      adopt(node, parse_factor(), Role::Operand);
      return finish(node);
    }
    return parse_power();
  }

  Node *parse_power() {
    const std::uint32_t begin = cur().begin;
    Node *base = parse_await_primary();
    if (!is_op("**"))
      return base;
    Node *node = make(NodeKind::BinOp, begin);
    node->value = std::string(tx(advance()));
    adopt(node, base, Role::Operand);
    adopt(node, parse_factor(), Role::Operand);
    return finish(node);
  }

  Node *parse_await_primary() {
    if (is_kw("await")) {
      Node *node = make(NodeKind::Await, cur().begin);
      advance();
      adopt(node, parse_primary(), Role::Value);
      return finish(node);
    }
    return parse_primary();
  }

  Node *parse_primary() {
    const std::uint32_t begin = cur().begin;
    Node *e = parse_atom();
    while (true) {
      if (is_op(".")) {
        advance();
        const Token &t = expect_name();
        Node *attr = make(NodeKind::Attribute, begin, t.end);
        attr->value = std::string(tx(t));
        adopt(attr, e, Role::Value);
        e = attr;
      } else if (is_op("(")) {
        advance();
        Node *call = make(NodeKind::Call, begin);
        adopt(call, e, Role::Func);
        parse_call_arguments(call, Role::Arg);
        expect_op(")");
        e = finish(call);
      } else if (is_op("[")) {
        advance();
        Node *sub = make(NodeKind::Subscript, begin);
        adopt(sub, e, Role::Value);
        adopt(sub, parse_slices(), Role::Item);
        expect_op("]");
        e = finish(sub);
      } else {
        return e;
      }
    }
  }

  void parse_call_arguments(Node *parent, Role positional) {
    while (!is_op(")")) {
      const std::uint32_t begin = cur().begin;
      if (is_op("*")) {
        Node *s = make(NodeKind::Starred, begin);
        advance();
        adopt(s, parse_expression(), Role::Value);
        adopt(parent, finish(s), positional);
      } else if (is_op("**")) {
        Node *d = make(NodeKind::DoubleStarred, begin);
        advance();
        adopt(d, parse_expression(), Role::Value);
        adopt(parent, finish(d), Role::Keyword);
      } else if (is_name() && is_op("=", 1)) {
        Node *kw = make(NodeKind::Keyword, begin);
        kw->value = std::string(tx(advance()));
        advance();
        adopt(kw, parse_expression(), Role::Value);
        adopt(parent, finish(kw), Role::Keyword);
      } else {
        Node *e = parse_named_expression();
        if (at_comprehension())
          e = parse_comprehension_tail(NodeKind::GeneratorExp, begin, e, nullptr);
        adopt(parent, e, positional);
      }
      if (!is_op(","))
        break;
      advance();
    }
  }

  Node *parse_slices() {
    const std::uint32_t begin = cur().begin;
    Node *first = parse_slice();
    if (!is_op(","))
      return first;
    Node *tuple = make(NodeKind::Tuple, begin);
    adopt(tuple, first, Role::Elt);
    while (is_op(",")) {
      advance();
      if (is_op("]"))
        break;
      adopt(tuple, parse_slice(), Role::Elt);
    }
    return finish(tuple);
  }

  Node *parse_slice() {
    const std::uint32_t begin = cur().begin;
    if (is_op("*"))
      return parse_star_expression();
    Node *lower = nullptr;
    if (!is_op(":")) {
      lower = parse_named_expression();
      if (!is_op(":"))
        return lower;
    }
    Node *slice = make(NodeKind::Slice, begin);
    if (lower)
      adopt(slice, lower, Role::Lower);
    advance(); // ':'
    auto at_stop = [&] { return is_op(":") || is_op("]") || is_op(","); };
    if (!at_stop())
      adopt(slice, parse_expression(), Role::Upper);
    if (is_op(":")) {
      advance();
      if (!is_op("]") && !is_op(","))
        adopt(slice, parse_expression(), Role::Step);
    }
    return finish(slice);
  }

  Node *parse_comprehension_tail(NodeKind kind, std::uint32_t begin, Node *elt, Node *value) {
    Node *node = make(kind, begin);
    if (kind == NodeKind::DictComp) {
      adopt(node, elt, Role::Key);
      adopt(node, value, Role::Value);
    } else {
      adopt(node, elt, Role::Elt);
    }
    while (at_comprehension()) {
      Node *comp = make(NodeKind::Comprehension, cur().begin);
      if (is_kw("async")) {
        comp->flags |= flag::kAsync;
        advance();
      }
      expect_kw("for");
      adopt(comp, parse_star_targets(), Role::Target);
      expect_kw("in");
      adopt(comp, parse_disjunction(), Role::Iter);
      while (is_kw("if")) {
        advance();
        adopt(comp, parse_disjunction(), Role::Condition);
      }
      adopt(node, finish(comp), Role::Generator);
    }
    return finish(node);
  }

  Node *parse_yield_expr() {
    const std::uint32_t begin = cur().begin;
    advance();
    if (is_kw("from")) {
      advance();
      Node *node = make(NodeKind::YieldFrom, begin);
      adopt(node, parse_expression(), Role::Value);
      return finish(node);
    }
    Node *node = make(NodeKind::Yield, begin);
    if (starts_expression())
      adopt(node, parse_star_expressions(), Role::Value);
    return finish(node);
  }

  Node *parse_atom() {
    const Token &t = cur();
    switch (t.kind) {
    case TokenKind::Name: {
      const auto s = tx(t);
      if (s == "None" || s == "True" || s == "False") {
        Node *c = make(NodeKind::Constant, t.begin, t.end);
        c->value = std::string(s);
        advance();
        return c;
      }
      if (is_keyword(s))
        fail("invalid syntax");
      Node *n = make(NodeKind::Name, t.begin, t.end);
      n->value = std::string(s);
      advance();
      return n;
    }
    case TokenKind::Number: {
      Node *c = make(NodeKind::Constant, t.begin, t.end);
      c->value = std::string(tx(t));
      advance();
      return c;
    }
    case TokenKind::String:
      return parse_strings();
    case TokenKind::Op:
      if (is_op("("))
        return parse_paren();
      if (is_op("["))
        return parse_list();
      if (is_op("{"))
        return parse_brace();
      if (is_op("...")) {
        Node *c = make(NodeKind::Constant, t.begin, t.end);
        c->value = "...";
        advance();
        return c;
      }
      break;
    default:
      break;
    }
    fail("invalid syntax");
  }

  Node *parse_paren() {
    const std::uint32_t begin = cur().begin;
    advance();
    if (is_op(")")) {
      advance();
      return finish(make(NodeKind::Tuple, begin));
    }
    if (is_kw("yield")) {
      Node *y = parse_yield_expr();
      expect_op(")");
      return y;
    }
    Node *first = parse_star_named_expression();
    if (at_comprehension()) {
      Node *g = parse_comprehension_tail(NodeKind::GeneratorExp, begin, first, nullptr);
      expect_op(")");
      return finish(g);
    }
    if (is_op(",")) {
      Node *tuple = make(NodeKind::Tuple, begin);
      adopt(tuple, first, Role::Elt);
      while (is_op(",")) {
        advance();
        if (is_op(")"))
          break;
        adopt(tuple, parse_star_named_expression(), Role::Elt);
      }
      expect_op(")");
      return finish(tuple);
    }
    expect_op(")");
    return first;
  }

  Node *parse_list() {
    const std::uint32_t begin = cur().begin;
    advance();
    Node *list = make(NodeKind::List, begin);
    if (is_op("]")) {
      advance();
      return finish(list);
    }
    Node *first = parse_star_named_expression();
    if (at_comprehension()) {
      Node *c = parse_comprehension_tail(NodeKind::ListComp, begin, first, nullptr);
      expect_op("]");
      return finish(c);
    }
    adopt(list, first, Role::Elt);
    while (is_op(",")) {
      advance();
      if (is_op("]"))
        break;
      adopt(list, parse_star_named_expression(), Role::Elt);
    }
    expect_op("]");
    return finish(list);
  }

  Node *parse_brace() {
    const std::uint32_t begin = cur().begin;
    advance();
    if (is_op("}")) {
      advance();
      return finish(make(NodeKind::Dict, begin));
    }
    auto parse_dict_rest = [&](Node *dict) {
      while (is_op(",")) {
        advance();
        if (is_op("}"))
          break;
        if (is_op("**")) {
          Node *d = make(NodeKind::DoubleStarred, cur().begin);
          advance();
          adopt(d, parse_bitwise_or(), Role::Value);
          adopt(dict, finish(d), Role::Value);
        } else {
          adopt(dict, parse_expression(), Role::Key);
          expect_op(":");
          adopt(dict, parse_expression(), Role::Value);
        }
      }
      expect_op("}");
      return finish(dict);
    };
    if (is_op("**")) {
      Node *dict = make(NodeKind::Dict, begin);
      Node *d = make(NodeKind::DoubleStarred, cur().begin);
      advance();
      adopt(d, parse_bitwise_or(), Role::Value);
      adopt(dict, finish(d), Role::Value);
      return parse_dict_rest(dict);
    }
    Node *first = parse_star_named_expression();
    if (is_op(":") && first->kind != NodeKind::Starred) {
      advance();
      Node *value = parse_expression();
      if (at_comprehension()) {
        Node *c = parse_comprehension_tail(NodeKind::DictComp, begin, first, value);
        expect_op("}");
        return finish(c);
      }
      Node *dict = make(NodeKind::Dict, begin);
      adopt(dict, first, Role::Key);
      adopt(dict, value, Role::Value);
      return parse_dict_rest(dict);
    }
    if (at_comprehension()) {
      Node *c = parse_comprehension_tail(NodeKind::SetComp, begin, first, nullptr);
      expect_op("}");
      return finish(c);
    }
    Node *set = make(NodeKind::Set, begin);
    adopt(set, first, Role::Elt);
    while (is_op(",")) {
      advance();
      if (is_op("}"))
        break;
      adopt(set, parse_star_named_expression(), Role::Elt);
    }
    expect_op("}");
    return finish(set);
  }

  // ---- strings and f-strings ----------------------------------------------

  Node *parse_strings() {
    Node *node = make(NodeKind::Str, cur().begin);
    while (cur().kind == TokenKind::String) {
      const Token &t = cur();
      const auto text = tx(t);
      const auto quote_at = text.find_first_of("'\"");
      const auto prefix = text.substr(0, quote_at);
      if (prefix.find_first_of("fF") != std::string_view::npos) {
        node->flags |= flag::kFString;
        const bool triple = text.size() >= quote_at + 6 &&
                            text[quote_at + 1] == text[quote_at] &&
                            text[quote_at + 2] == text[quote_at];
        const std::uint32_t q = triple ? 3 : 1;
        parse_fstring(node, t.begin + static_cast<std::uint32_t>(quote_at) + q, t.end - q);
      }
      advance();
    }
    return finish(node);
  }

  [[noreturn]] void fail_offset(std::uint32_t offset, const std::string &msg) const {
    throw SyntaxError(line_of(src_, offset), 0, msg);
  }

  void parse_fstring(Node *node, std::uint32_t begin, std::uint32_t end) {
    std::uint32_t i = begin;
    while (i < end) {
      const char c = src_[i];
      if (c == '{') {
        if (i + 1 < end && src_[i + 1] == '{') {
          i += 2;
          continue;
        }
        i = parse_fstring_field(node, i + 1, end);
      } else if (c == '}') {
        if (i + 1 < end && src_[i + 1] == '}') {
          i += 2;
          continue;
        }
        fail_offset(i, "f-string: single '}' is not allowed");
      } else {
        ++i;
      }
    }
  }

  // Parses one replacement field starting just after '{'. Returns the offset
  // just past the matching '}'.
  std::uint32_t parse_fstring_field(Node *node, std::uint32_t start, std::uint32_t end) {
    int depth = 0;
    std::uint32_t j = start;
    char in_string = 0;
    bool triple = false;
    for (; j < end; ++j) {
      const char c = src_[j];
      if (in_string) {
        if (c == in_string) {
          if (!triple)
            in_string = 0;
          else if (j + 2 < end && src_[j + 1] == c && src_[j + 2] == c) {
            in_string = 0;
            j += 2;
          }
        }
        continue;
      }
      if (c == '\'' || c == '"') {
        in_string = c;
        triple = j + 2 < end && src_[j + 1] == c && src_[j + 2] == c;
        if (triple)
          j += 2;
        continue;
      }
      if (c == '(' || c == '[' || c == '{') {
        ++depth;
        continue;
      }
      if (c == ')' || c == ']') {
        --depth;
        continue;
      }
      if (c == '}') {
        if (depth == 0)
          break;
        --depth;
        continue;
      }
      if (depth != 0)
        continue;
      const char next = j + 1 < end ? src_[j + 1] : '\0';
      if (c == '!' && next != '=')
        break;
      if (c == ':')
        break;
      if (c == '=') {
        const char prev = j > start ? src_[j - 1] : '\0';
        if (next == '=') {
          ++j;
          continue;
        }
        if (prev == '=' || prev == '!' || prev == '<' || prev == '>')
          continue;
        break;
      }
    }
    if (j >= end)
      fail_offset(start, "f-string: expecting '}'");
    const auto expr_text = src_.substr(start, j - start);
    if (expr_text.find_first_not_of(" \t\r\n") == std::string_view::npos)
      fail_offset(start, "f-string: empty expression not allowed");

    auto toks = significant(detail::tokenize_fragment(src_, start, j, line_of(src_, start)));
    Parser sub(src_, std::move(toks), arena_);
    adopt(node, sub.parse_fragment(), Role::Value);

    if (src_[j] == '=') {
      ++j;
      while (j < end && (src_[j] == ' ' || src_[j] == '\t'))
        ++j;
    }
    if (j < end && src_[j] == '!')
      j += 2;
    if (j < end && src_[j] == ':') {
      ++j;
      while (j < end && src_[j] != '}') {
        if (src_[j] == '{')
          j = parse_fstring_field(node, j + 1, end);
        else
          ++j;
      }
    }
    if (j >= end || src_[j] != '}')
      fail_offset(start, "f-string: expecting '}'");
    return j + 1;
  }

  std::string_view src_;
  std::vector<Token> toks_;
  std::vector<std::unique_ptr<Node>> &arena_;
  std::size_t pos_ = 0;
  std::uint32_t last_sig_end_ = 0;
  std::uint32_t last_newline_end_ = 0;
};

namespace {

std::optional<ByteSpan> find_generated_header(std::string_view src) {
  if (src.substr(0, kGeneratedMarker.size()) != kGeneratedMarker)
    return std::nullopt;
  std::size_t pos = 0;
  bool first = true;
  while (pos < src.size()) {
    const auto nl = src.find('\n', pos);
    if (nl == std::string_view::npos)
      break;
    const auto line = src.substr(pos, nl - pos);
    const bool header_line = first || line.rfind("# target:", 0) == 0 ||
                             line.rfind("# index:", 0) == 0;
    if (!header_line)
      break;
    first = false;
    pos = nl + 1;
  }
  if (pos == 0)
    return std::nullopt;
  return ByteSpan{0, static_cast<std::uint32_t>(pos)};
}

} // namespace

SyntaxTree parse_lossless(const SourceUnit &unit) {
  if (!is_valid_utf8(unit.bytes))
    throw EncodingError(unit.path + ": source is not valid UTF-8");
  SyntaxTree tree;
  tree.path = unit.path;
  tree.sha1 = unit.sha1.empty() ? sha1_hex(unit.bytes) : unit.sha1;
  tree.source_ = std::make_shared<const std::string>(unit.bytes);
  tree.tokens_ = tokenize(std::string_view(*tree.source_));
  tree.header = find_generated_header(*tree.source_);
  Parser parser(*tree.source_, significant(tree.tokens_.tokens), tree.arena_);
  parser.parse_module(tree);
  return tree;
}

SyntaxTree parse_source(std::string path, std::string bytes) {
  return parse_lossless(SourceUnit::from_bytes(std::move(path), std::move(bytes)));
}

std::string emit(const SyntaxTree &tree) {
  std::string out;
  out.reserve(tree.source().size() + tree.top_level.size());
  auto append = [&](std::string_view piece) {
    if (piece.empty())
      return;
    if (!out.empty() && out.back() != '\n' && out.back() != '\r')
      out.push_back('\n');
    out.append(piece);
  };
  if (tree.header)
    out.append(tree.text(*tree.header));
  for (const auto &item : tree.top_level)
    append(tree.text(item.full));
  // End trivia without a newline is legal only right after a newline-less
  // last statement in the original file, which is exactly the unmodified case.
  const auto tail = tree.text(tree.end_trivia);
  if (!tail.empty() && !out.empty() && out.back() != '\n' && out.back() != '\r' &&
      tail.find_first_not_of(" \t\f") != std::string_view::npos)
    out.push_back('\n');
  out.append(tail);
  return out;
}

} // namespace scopeweaver::syntax
