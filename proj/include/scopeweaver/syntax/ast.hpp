#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace scopeweaver::syntax {

enum class NodeKind : std::uint8_t {
  // statements
  FunctionDef,
  ClassDef,
  Return,
  Delete,
  Assign,
  AugAssign,
  AnnAssign,
  For,
  While,
  If,
  With,
  WithItem,
  Match,
  MatchCase,
  Raise,
  Try,
  ExceptHandler,
  Assert,
  Import,
  ImportFrom,
  Alias,
  Global,
  Nonlocal,
  ExprStmt,
  Pass,
  Break,
  Continue,
  SimpleStatements, // several `;`-separated statements on one top-level line
  // expressions
  BoolOp,
  NamedExpr,
  BinOp,
  UnaryOp,
  Lambda,
  IfExp,
  Dict,
  Set,
  ListComp,
  SetComp,
  DictComp,
  GeneratorExp,
  Comprehension,
  Await,
  Yield,
  YieldFrom,
  Compare,
  Call,
  Keyword,
  Constant,
  Str,
  Attribute,
  Subscript,
  Starred,
  DoubleStarred,
  Name,
  Identifier, // bare identifier in global/nonlocal lists
  List,
  Tuple,
  Slice,
  Arguments,
  Arg,
  // match patterns
  MatchValue,
  MatchSingleton,
  MatchSequence,
  MatchMapping,
  MatchClass,
  MatchStar,
  MatchAs,
  MatchOr,
};

std::string_view to_string(NodeKind kind) noexcept;

/// Position of a child inside its parent. Scope analysis walks children by
/// role rather than by index.
enum class Role : std::uint8_t {
  None,
  Decorator,
  Params,
  Param,
  Default,
  Annotation,
  Returns,
  Body,
  OrElse,
  FinalBody,
  Handler,
  Base,
  Keyword,
  Target,
  Value,
  Test,
  Iter,
  Elt,
  Key,
  Generator,
  Condition,
  Subject,
  Case,
  Pattern,
  Guard,
  Func,
  Arg,
  Lower,
  Upper,
  Step,
  Operand,
  Item,
  Type,
  Cause,
  Msg,
};

enum class Ctx : std::uint32_t { Load = 0, Store = 1, Del = 2 };

enum class ArgKind : std::uint32_t {
  PositionalOnly = 0,
  Normal = 1,
  VarArgs = 2,
  KeywordOnly = 3,
  KwArgs = 4,
};

namespace flag {
inline constexpr std::uint32_t kAsync = 1u << 8;
inline constexpr std::uint32_t kFString = 1u << 9;
inline constexpr std::uint32_t kExceptStar = 1u << 10;
} // namespace flag

/// Generic syntax node. `value` holds the identifier, attribute, operator,
/// or module path; `extra` holds an `as` alias. Low flag bits carry Ctx or
/// ArgKind; high bits are the flag:: constants. For ImportFrom, `flags`
/// is the relative-import level.
struct Node {
  NodeKind kind;
  Role role = Role::None;
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
  std::uint32_t flags = 0;
  std::string value;
  std::string extra;
  std::vector<Node *> children;

  Ctx ctx() const noexcept { return static_cast<Ctx>(flags & 0xFF); }
  ArgKind arg_kind() const noexcept { return static_cast<ArgKind>(flags & 0xFF); }
  bool is_async() const noexcept { return (flags & flag::kAsync) != 0; }

  /// First child with `r`, or nullptr.
  const Node *child(Role r) const noexcept {
    for (const Node *c : children)
      if (c->role == r)
        return c;
    return nullptr;
  }
  std::vector<const Node *> children_with(Role r) const {
    std::vector<const Node *> out;
    for (const Node *c : children)
      if (c->role == r)
        out.push_back(c);
    return out;
  }
};

} // namespace scopeweaver::syntax
