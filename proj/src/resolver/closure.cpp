#include "scopeweaver/resolver/closure.hpp"

#include <algorithm>
#include <deque>
#include <tuple>

#include "scopeweaver/errors.hpp"

using nlohmann::json;

namespace scopeweaver::resolver {

using scanner::BlockCandidate;
using scanner::CorpusIndex;
using scanner::Export;
using scanner::UnitRecord;
using syntax::Node;
using syntax::NodeKind;

std::string_view to_string(EdgeKind kind) noexcept {
  switch (kind) {
  case EdgeKind::LoadTime: return "load";
  case EdgeKind::Deferred: return "deferred";
  case EdgeKind::Annotation: return "annotation";
  case EdgeKind::Rebinding: return "rebinding";
  }
  return "?";
}

std::set<std::string> ClosureResult::definition_ids() const {
  std::set<std::string> out;
  for (const auto &d : definitions)
    out.insert(d.id);
  return out;
}

std::set<std::string> ClosureResult::import_texts() const {
  std::set<std::string> out;
  for (const auto &i : imports)
    out.insert(i.text);
  return out;
}

const BlockCandidate &select_target(const CorpusIndex &index, const std::string &target) {
  const auto found = index.find_targets(target);
  if (found.empty())
    throw TargetNotFound("no candidate named '" + target + "'");
  if (found.size() > 1) {
    std::string msg = "'" + target + "' matches " + std::to_string(found.size()) +
                      " candidates; use a path-qualified name:";
    for (const auto *c : found)
      msg += " " + c->unit_path + "::" + c->name;
    throw AmbiguousTarget(msg);
  }
  return *found.front();
}

const DependencyGraph &Resolver::graph(const UnitRecord &unit) {
  std::lock_guard lock(mutex_);
  auto &slot = graphs_[unit.path];
  if (!slot)
    slot = std::make_unique<DependencyGraph>(build_dependency_graph(index_, unit));
  return *slot;
}

namespace {

std::string join(const std::vector<std::string> &v, const char *sep) {
  std::string out;
  for (const auto &s : v)
    out += (out.empty() ? "" : sep) + s;
  return out;
}

std::string import_target(const CorpusIndex &index, const UnitRecord &unit, const Node &stmt,
                          const Node &alias) {
  if (stmt.kind == NodeKind::Import)
    return alias.extra.empty() ? syntax::bound_name(alias) : alias.value;
  const auto module = index.import_from_module(unit, stmt);
  const std::string base =
      module ? *module : std::string(stmt.flags, '.') + stmt.value;
  return base + "." + alias.value;
}

class ClosureBuilder {
public:
  ClosureBuilder(Resolver &resolver, const BlockCandidate &target)
      : resolver_(resolver), index_(resolver.index()), target_(target) {}

  ClosureResult run() {
    const UnitRecord *unit = index_.unit(target_.unit_path);
    if (!unit || !unit->ok())
      throw TargetNotFound("unit of '" + target_.qualname + "' is not parsed");
    result_.target = target_.qualname;
    result_.target_index = add_definition(*unit, target_.item);
    while (!queue_.empty()) {
      const std::size_t idx = queue_.front();
      queue_.pop_front();
      process(idx);
    }
    finish();
    return std::move(result_);
  }

private:
  using Key = std::tuple<std::string, std::uint32_t, std::string>;

  std::size_t add_definition(const UnitRecord &unit, std::uint32_t item) {
    const Key key{unit.path, item, ""};
    if (auto it = index_of_.find(key); it != index_of_.end())
      return it->second;
    const auto &g = resolver_.graph(unit);
    DefinitionRef d;
    d.unit_path = unit.path;
    d.item = item;
    if (const GraphNode *n = g.node(item))
      d.names = n->names;
    if (d.names.empty())
      d.names.push_back("<item " + std::to_string(item) + ">");
    const std::size_t idx = result_.definitions.size();
    result_.definitions.push_back(std::move(d));
    units_.push_back(&unit);
    index_of_[key] = idx;
    queue_.push_back(idx);
    add_future_imports(unit);
    return idx;
  }

  std::size_t add_alias(const UnitRecord &unit, std::uint32_t import_item,
                        const std::string &local, const std::string &original) {
    const Key key{unit.path, import_item, local};
    if (auto it = index_of_.find(key); it != index_of_.end())
      return it->second;
    DefinitionRef d;
    d.unit_path = unit.path;
    d.item = import_item;
    d.names = {local};
    d.synthesized = true;
    d.alias_of = original;
    d.text = local + " = " + original + "\n";
    const std::size_t idx = result_.definitions.size();
    result_.definitions.push_back(std::move(d));
    units_.push_back(&unit);
    index_of_[key] = idx;
    return idx;
  }

  void add_import(const UnitRecord &unit, const Node *stmt) {
    ImportRef ref;
    ref.text = std::string(unit.tree->text(*stmt));
    if (!seen_imports_.insert(ref.text).second)
      return;
    ref.unit_path = unit.path;
    ref.span = {stmt->begin, stmt->end};
    ref.future = stmt->kind == NodeKind::ImportFrom && stmt->flags == 0 &&
                 stmt->value == "__future__";
    for (const Node *alias : stmt->children) {
      if (alias->value == "*") {
        const auto module = index_.import_from_module(unit, *stmt);
        ref.bindings.push_back({"*", "*" + (module ? *module : stmt->value)});
      } else {
        ref.bindings.push_back(
            {syntax::bound_name(*alias), import_target(index_, unit, *stmt, *alias)});
      }
    }
    result_.imports.push_back(std::move(ref));
  }

  void add_future_imports(const UnitRecord &unit) {
    if (!future_units_.insert(unit.path).second)
      return;
    for (const auto &item : unit.tree->top_level) {
      const Node *s = item.stmt;
      if (s->kind == NodeKind::ImportFrom && s->flags == 0 && s->value == "__future__")
        add_import(unit, s);
    }
  }

  void link(std::size_t from, std::size_t to, EdgeKind kind, const std::string &name) {
    if (from != to)
      edges_.insert(ClosureEdge{from, to, kind, name});
  }

  void warn(std::string message) {
    if (std::find(result_.warnings.begin(), result_.warnings.end(), message) ==
        result_.warnings.end())
      result_.warnings.push_back(std::move(message));
  }

  // Makes `local` available to definition `from` given where it comes from.
  void apply(std::size_t from, const UnitRecord &unit, std::uint32_t import_item,
             const std::string &local, const Export &e, EdgeKind kind) {
    switch (e.kind) {
    case Export::Kind::Definition: {
      const std::size_t def = add_definition(*e.unit, e.item);
      if (e.name == local) {
        link(from, def, kind, local);
      } else {
        const std::size_t alias = add_alias(unit, import_item, local, e.name);
        link(from, alias, kind, local);
        link(alias, def, EdgeKind::LoadTime, e.name);
      }
      return;
    }
    case Export::Kind::Import: {
      add_import(*e.unit, e.statement);
      result_.external.insert(e.name);
      if (e.in_index_module)
        warn("'" + e.name + "' names an indexed module; its import is carried verbatim");
      if (e.unresolved_relative)
        warn("relative import in " + e.unit->path + " reaches outside the indexed roots");
      if (e.name != local)
        link(from, add_alias(unit, import_item, local, e.name), kind, local);
      return;
    }
    case Export::Kind::ExternalStar:
      for (const Node *stmt : e.star_statements)
        add_import(*e.unit, stmt);
      result_.external.insert(local);
      return;
    case Export::Kind::Missing:
      result_.unresolved.insert(local);
      return;
    }
  }

  Export resolve_edge(const UnitRecord &unit, const Edge &edge) const {
    if (edge.via_star)
      return index_.resolve_star(unit, edge.name);
    const auto &sites = unit.scopes->module().bindings.at(edge.name);
    const syntax::BindingSite *site = nullptr;
    for (const auto &s : sites)
      if (s.item == edge.to && s.kind == syntax::SiteKind::Import)
        site = &s;
    if (!site) {
      Export missing;
      missing.unit = &unit;
      missing.name = edge.name;
      return missing;
    }
    return index_.resolve_import(unit, *site);
  }

  void process(std::size_t idx) {
    if (result_.definitions[idx].synthesized)
      return;
    const UnitRecord &unit = *units_[idx];
    const std::uint32_t item = result_.definitions[idx].item;
    const auto &g = resolver_.graph(unit);

    auto follow = [&](const std::vector<Edge> &edges, EdgeKind kind) {
      auto first = std::lower_bound(edges.begin(), edges.end(), item,
                                    [](const Edge &e, std::uint32_t i) { return e.from < i; });
      for (auto it = first; it != edges.end() && it->from == item; ++it) {
        const GraphNode *target = g.node(it->to);
        if (!it->via_star && target && !target->is_import) {
          link(idx, add_definition(unit, it->to), kind, it->name);
          continue;
        }
        apply(idx, unit, it->to, it->name, resolve_edge(unit, *it), kind);
      }
    };
    follow(g.edges, EdgeKind::LoadTime);
    follow(g.deferred_edges, EdgeKind::Deferred);

    // Annotations pull in imports but never definitions.
    auto first = std::lower_bound(g.annotation_edges.begin(), g.annotation_edges.end(), item,
                                  [](const Edge &e, std::uint32_t i) { return e.from < i; });
    for (auto it = first; it != g.annotation_edges.end() && it->from == item; ++it) {
      const GraphNode *target = g.node(it->to);
      if (!it->via_star && target && !target->is_import) {
        pending_order_.push_back({idx, Key{unit.path, it->to, ""}, it->name});
        continue;
      }
      const Export e = resolve_edge(unit, *it);
      if (e.kind == Export::Kind::Import && e.name == it->name) {
        add_import(*e.unit, e.statement);
        result_.external.insert(e.name);
      } else if (e.kind == Export::Kind::ExternalStar) {
        for (const Node *stmt : e.star_statements)
          add_import(*e.unit, stmt);
      } else if (e.kind == Export::Kind::Definition) {
        pending_order_.push_back({idx, Key{e.unit->path, e.item, ""}, it->name});
      }
    }
    if (auto it = g.unresolved.find(item); it != g.unresolved.end())
      result_.unresolved.insert(it->second.begin(), it->second.end());
  }

  void finish() {
    for (const auto &p : pending_order_)
      if (auto it = index_of_.find(p.target); it != index_of_.end())
        link(p.from, it->second, EdgeKind::Annotation, p.name);
    // Rebinding order between items of one unit that are both included.
    for (std::size_t i = 0; i < result_.definitions.size(); ++i) {
      const auto &d = result_.definitions[i];
      if (d.synthesized)
        continue;
      const auto &g = resolver_.graph(*units_[i]);
      for (const auto &e : g.rebinding_edges) {
        if (e.from != d.item)
          continue;
        if (auto it = index_of_.find(Key{d.unit_path, e.to, ""}); it != index_of_.end())
          link(i, it->second, EdgeKind::Rebinding, e.name);
      }
    }
    result_.edges.assign(edges_.begin(), edges_.end());

    std::map<std::string, int> id_count;
    for (auto &d : result_.definitions) {
      d.id = d.unit_path + "::" +
             (d.synthesized ? d.names.front() + "=" + d.alias_of : join(d.names, ","));
      ++id_count[d.id];
    }
    for (auto &d : result_.definitions)
      if (id_count[d.id] > 1)
        d.id += "@" + std::to_string(d.item);

    std::sort(result_.imports.begin(), result_.imports.end(),
              [](const ImportRef &a, const ImportRef &b) { return a.text < b.text; });
  }

  struct PendingOrder {
    std::size_t from;
    Key target;
    std::string name;
  };

  Resolver &resolver_;
  const CorpusIndex &index_;
  const BlockCandidate &target_;
  ClosureResult result_;
  std::vector<const UnitRecord *> units_;
  std::map<Key, std::size_t> index_of_;
  std::deque<std::size_t> queue_;
  std::set<std::string> seen_imports_;
  std::set<std::string> future_units_;
  std::set<ClosureEdge> edges_;
  std::vector<PendingOrder> pending_order_;
};

} // namespace

ClosureResult Resolver::closure(const BlockCandidate &target) {
  return ClosureBuilder(*this, target).run();
}

ClosureResult Resolver::closure(const std::string &target) {
  return closure(select_target(index_, target));
}

ClosureResult closure(const CorpusIndex &index, const BlockCandidate &target) {
  Resolver r(index);
  return r.closure(target);
}

ClosureResult closure(const CorpusIndex &index, const std::string &target) {
  Resolver r(index);
  return r.closure(target);
}

json to_json(const ClosureResult &c) {
  json defs = json::array();
  for (const auto &d : c.definitions) {
    json j = {{"id", d.id}, {"unit", d.unit_path}, {"item", d.item}, {"names", d.names}};
    if (d.synthesized)
      j["alias_of"] = d.alias_of;
    defs.push_back(std::move(j));
  }
  json imports = json::array();
  for (const auto &i : c.imports)
    imports.push_back({{"text", i.text}, {"unit", i.unit_path}});
  json edges = json::array();
  for (const auto &e : c.edges)
    edges.push_back({{"from", c.definitions[e.from].id},
                     {"to", c.definitions[e.to].id},
                     {"kind", std::string(to_string(e.kind))},
                     {"name", e.name}});
  return {{"target", c.target},
          {"definitions", defs},
          {"imports", imports},
          {"edges", edges},
          {"unresolved", c.unresolved},
          {"external", c.external},
          {"warnings", c.warnings}};
}

} // namespace scopeweaver::resolver
