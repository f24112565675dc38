#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "scopeweaver/scanner/corpus_index.hpp"

namespace scopeweaver::resolver {

/// A top-level item that binds module-level names (or star-imports them).
struct GraphNode {
  std::uint32_t item = 0;
  std::vector<std::string> names;
  bool is_import = false;
};

/// `from` reads `name`, which `to` binds. Star edges point at the last star
/// import of the unit; the name is resolved through all of them.
struct Edge {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  std::string name;
  bool via_star = false;

  friend auto operator<=>(const Edge &, const Edge &) = default;
};

struct DependencyGraph {
  std::string unit_path;
  std::vector<GraphNode> nodes; // sorted by item
  std::vector<Edge> edges;            // load-time: `to` must run before `from`
  std::vector<Edge> deferred_edges;   // reads inside function bodies
  std::vector<Edge> annotation_edges; // annotations evaluated at load time; ordering only
  std::vector<Edge> rebinding_edges;  // later binding -> earlier binding of a name; ordering only
  std::map<std::uint32_t, std::set<std::string>> unresolved; // item -> names bound nowhere

  const GraphNode *node(std::uint32_t item) const;
};

/// Per-unit graph from scope analysis. Uses at load time depend on the most
/// recent earlier binding; deferred uses on the final binding.
DependencyGraph build_dependency_graph(const syntax::SyntaxTree &tree,
                                       const syntax::ScopeTable &scopes);

DependencyGraph build_dependency_graph(const scanner::CorpusIndex &index,
                                       const scanner::UnitRecord &unit);

} // namespace scopeweaver::resolver
