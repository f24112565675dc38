#include "scopeweaver/resolver/dependency_graph.hpp"

#include <algorithm>

namespace scopeweaver::resolver {

using syntax::Resolution;
using syntax::ScopeId;

const GraphNode *DependencyGraph::node(std::uint32_t item) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), item,
                             [](const GraphNode &n, std::uint32_t i) { return n.item < i; });
  return it != nodes.end() && it->item == item ? &*it : nullptr;
}

namespace {

void normalize(std::vector<Edge> &edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

} // namespace

DependencyGraph build_dependency_graph(const syntax::SyntaxTree &tree,
                                       const syntax::ScopeTable &scopes) {
  DependencyGraph g;
  g.unit_path = tree.path;
  const auto &module = scopes.module();

  // Items binding each name; bindings made through `global` only count when
  // nothing else binds the name.
  std::map<std::string, std::vector<std::uint32_t>> binders;
  std::map<std::uint32_t, std::set<std::string>> names;
  for (const auto &[name, sites] : module.bindings) {
    std::vector<std::uint32_t> direct, indirect;
    for (const auto &site : sites)
      (site.via_global ? indirect : direct).push_back(site.item);
    auto &items = direct.empty() ? indirect : direct;
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    for (auto i : direct)
      names[i].insert(name);
    binders[name] = items;
  }
  std::set<std::uint32_t> star_items;
  for (const auto &star : module.star_imports)
    star_items.insert(star.item);

  std::set<std::uint32_t> node_items;
  for (const auto &[item, _] : names)
    node_items.insert(item);
  node_items.insert(star_items.begin(), star_items.end());
  for (auto item : node_items) {
    GraphNode n;
    n.item = item;
    if (auto it = names.find(item); it != names.end())
      n.names.assign(it->second.begin(), it->second.end());
    n.is_import = scanner::is_import_item(tree.top_level[item]);
    g.nodes.push_back(std::move(n));
  }

  for (ScopeId sid = 0; sid < scopes.scopes.size(); ++sid) {
    for (const auto &use : scopes.scopes[sid].uses) {
      if (use.annotation && !use.load_time)
        continue;
      auto &bucket = use.annotation ? g.annotation_edges
                     : use.load_time ? g.edges
                                     : g.deferred_edges;
      const auto b = syntax::resolve_name(use.name, sid, scopes);
      if (b.resolution == Resolution::Global) {
        const auto &items = binders[use.name];
        std::optional<std::uint32_t> to;
        if (use.load_time) {
          for (auto i : items)
            if (i < use.item)
              to = i;
        }
        const bool self_bound =
            std::find(items.begin(), items.end(), use.item) != items.end();
        if (!to && !(use.load_time && self_bound)) {
          for (auto i : items)
            if (i != use.item)
              to = i;
        }
        if (to && *to != use.item)
          bucket.push_back(Edge{use.item, *to, use.name, false});
      } else if (b.resolution == Resolution::External) {
        bucket.push_back(Edge{use.item, *star_items.rbegin(), use.name, true});
      } else if (b.resolution == Resolution::Unresolved && !use.annotation) {
        g.unresolved[use.item].insert(use.name);
      }
    }
  }
  for (const auto &[name, items] : binders)
    for (std::size_t k = 1; k < items.size(); ++k)
      g.rebinding_edges.push_back(Edge{items[k], items[k - 1], name, false});

  normalize(g.edges);
  normalize(g.deferred_edges);
  normalize(g.annotation_edges);
  normalize(g.rebinding_edges);
  return g;
}

DependencyGraph build_dependency_graph(const scanner::CorpusIndex &, const scanner::UnitRecord &unit) {
  if (!unit.ok()) {
    DependencyGraph g;
    g.unit_path = unit.path;
    return g;
  }
  return build_dependency_graph(*unit.tree, *unit.scopes);
}

} // namespace scopeweaver::resolver
