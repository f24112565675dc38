#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "scopeweaver/syntax/syntax_tree.hpp"

namespace scopeweaver::syntax {

enum class ScopeKind : std::uint8_t { Module, Class, Function, Lambda, Comprehension };

enum class SiteKind : std::uint8_t { Definition, Import, Parameter, Assignment };

std::string_view to_string(ScopeKind kind) noexcept;
std::string_view to_string(SiteKind kind) noexcept;

struct BindingSite {
  SiteKind kind;
  const Node *node;      // Name, FunctionDef, ClassDef, Alias, Arg, ...
  const Node *statement; // innermost enclosing statement (Import for aliases)
  std::uint32_t item;    // top-level item index containing the site
  bool via_global = false; // module binding made from a function through `global`
};

/// One NAME read. `load_time` is true when the read happens while the
/// enclosing top-level statement itself executes (bases, decorators,
/// defaults, class bodies, module-level expressions); false inside function
/// and lambda bodies.
struct NameUse {
  std::string name;
  const Node *node;
  std::uint32_t item;
  bool load_time;
  bool annotation;
};

struct StarImport {
  const Node *statement; // ImportFrom
  std::uint32_t item;
};

using ScopeId = std::uint32_t;
inline constexpr ScopeId kNoScope = static_cast<ScopeId>(-1);

struct Scope {
  ScopeKind kind;
  std::string name;
  ScopeId parent = kNoScope;
  const Node *node = nullptr; // defining node; nullptr for the module
  std::map<std::string, std::vector<BindingSite>> bindings;
  std::set<std::string> globals;
  std::set<std::string> nonlocals;
  std::vector<NameUse> uses;
  std::vector<StarImport> star_imports;
  std::vector<ScopeId> children;

  bool binds(const std::string &n) const { return bindings.count(n) != 0; }
};

/// Tree of scopes for one unit; scopes[0] is the module scope.
struct ScopeTable {
  std::vector<Scope> scopes;

  const Scope &module() const { return scopes.front(); }
  const Scope &at(ScopeId id) const { return scopes.at(id); }
  /// Innermost scope whose defining node is `node`, or kNoScope.
  ScopeId scope_of(const Node *node) const;
};

/// Builds scopes for a parsed unit. Throws ScopeError for `nonlocal`
/// declarations with no enclosing function binding (or at module level).
ScopeTable build_scopes(const SyntaxTree &tree);

enum class Resolution : std::uint8_t {
  Local,
  Enclosing,
  Global,
  Builtin,
  External,   // only satisfiable through a star import
  Unresolved,
};

std::string_view to_string(Resolution r) noexcept;

struct Binding {
  std::string name;
  Resolution resolution = Resolution::Unresolved;
  ScopeId scope = kNoScope; // scope holding the binding, if any
  std::vector<BindingSite> sites;
};

/// LEGB lookup of `name` as seen from `scope`. Class scopes are skipped when
/// searching enclosing scopes. Absence is reported as External (a star
/// import could provide it) or Unresolved, never as a fabricated binding.
Binding resolve_name(const std::string &name, ScopeId scope, const ScopeTable &table);

/// Name bound by one import alias: `import a.b` binds `a`, `as x` binds `x`.
std::string bound_name(const Node &alias);

} // namespace scopeweaver::syntax
