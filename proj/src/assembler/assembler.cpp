#include "scopeweaver/assembler/assembler.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <queue>
#include <set>
#include <tuple>

#include "scopeweaver/digest.hpp"
#include "scopeweaver/errors.hpp"

using nlohmann::json;

namespace scopeweaver::assembler {

using resolver::ClosureResult;
using resolver::DefinitionRef;
using resolver::EdgeKind;

namespace {

// Strongly connected components (Tarjan) of the ordering subgraph
// restricted to `alive`; returns the non-trivial ones.
std::vector<std::vector<std::size_t>>
cycles(std::size_t n, const std::vector<std::vector<std::size_t>> &deps,
       const std::vector<bool> &alive) {
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> out;
  int counter = 0;
  std::function<void(std::size_t)> visit = [&](std::size_t v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (auto w : deps[v]) {
      if (!alive[w])
        continue;
      if (index[w] < 0) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::size_t> comp;
      std::size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp.push_back(w);
      } while (w != v);
      if (comp.size() > 1)
        out.push_back(std::move(comp));
    }
  };
  for (std::size_t v = 0; v < n; ++v)
    if (alive[v] && index[v] < 0)
      visit(v);
  return out;
}

} // namespace

std::vector<std::size_t> topo_order(const ClosureResult &closure) {
  const auto &defs = closure.definitions;
  const std::size_t n = defs.size();
  // deps[a] = definitions that must precede a; soft[a] also counts deferred
  // references, which only shape the preferred order.
  std::vector<std::vector<std::size_t>> deps(n), users(n), soft(n);
  std::vector<std::size_t> pending(n, 0);
  std::set<std::pair<std::size_t, std::size_t>> seen, seen_soft;
  for (const auto &e : closure.edges) {
    if (e.from == e.to)
      continue;
    if (seen_soft.insert({e.from, e.to}).second)
      soft[e.from].push_back(e.to);
    if (e.kind == EdgeKind::Deferred || !seen.insert({e.from, e.to}).second)
      continue;
    deps[e.from].push_back(e.to);
    users[e.to].push_back(e.from);
    ++pending[e.from];
  }
  using Name = std::tuple<std::string, std::string, std::uint32_t, std::size_t>;
  auto name = [&](std::size_t i) {
    return Name{defs[i].sort_name(), defs[i].unit_path, defs[i].item, i};
  };
  auto by_name = [&](std::size_t a, std::size_t b) { return name(a) < name(b); };
  for (auto &s : soft)
    std::sort(s.begin(), s.end(), by_name);

  // Dependencies-first preference: post-order of a depth-first walk from the
  // target over every reference, neighbours in name order.
  std::vector<std::size_t> rank(n, 0);
  std::vector<bool> visited(n, false);
  std::size_t next_rank = 0;
  std::function<void(std::size_t)> walk = [&](std::size_t v) {
    visited[v] = true;
    for (auto w : soft[v])
      if (!visited[w])
        walk(w);
    rank[v] = next_rank++;
  };
  if (closure.target_index < n)
    walk(closure.target_index);
  std::vector<std::size_t> rest(n);
  for (std::size_t i = 0; i < n; ++i)
    rest[i] = i;
  std::sort(rest.begin(), rest.end(), by_name);
  for (auto i : rest)
    if (!visited[i])
      walk(i);

  using Key = std::pair<std::size_t, std::size_t>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
  auto key = [&](std::size_t i) { return Key{rank[i], i}; };
  for (std::size_t i = 0; i < n; ++i)
    if (pending[i] == 0)
      ready.push(key(i));
  std::vector<std::size_t> order;
  std::vector<bool> placed(n, false);
  while (!ready.empty()) {
    const std::size_t i = ready.top().second;
    ready.pop();
    order.push_back(i);
    placed[i] = true;
    for (auto u : users[i])
      if (--pending[u] == 0)
        ready.push(key(u));
  }
  if (order.size() != n) {
    std::vector<bool> alive(n);
    for (std::size_t i = 0; i < n; ++i)
      alive[i] = !placed[i];
    std::set<std::string> members;
    for (const auto &comp : cycles(n, deps, alive))
      for (auto i : comp)
        members.insert(defs[i].id);
    std::string msg = "load-time cycle among:";
    for (const auto &m : members)
      msg += " " + m;
    throw CycleError(msg);
  }
  return order;
}

std::string preamble(const std::string &target, const std::string &index_digest) {
  return std::string(syntax::kGeneratedMarker) + " extract; do not edit.\n# target: " + target +
         "\n# index: " + index_digest + "\n";
}

void check_collisions(const ClosureResult &closure) {
  struct Binder {
    std::string key;   // equal keys never conflict
    std::string where; // for the message
  };
  std::map<std::string, std::vector<Binder>> binders;
  for (const auto &d : closure.definitions) {
    for (const auto &name : d.names) {
      if (d.synthesized)
        binders[name].push_back({"alias:" + d.text, d.unit_path + " (alias of " + d.alias_of + ")"});
      else
        binders[name].push_back({"def:" + d.unit_path, d.id});
    }
  }
  for (const auto &imp : closure.imports)
    for (const auto &b : imp.bindings)
      if (b.name != "*")
        binders[b.name].push_back({"import:" + b.target, imp.unit_path + " (" + imp.text + ")"});
  for (const auto &[name, list] : binders) {
    for (std::size_t i = 1; i < list.size(); ++i) {
      if (list[i].key != list[0].key)
        throw NameCollision("name '" + name + "' is bound by both " + list[0].where + " and " +
                            list[i].where);
    }
  }
}

AssembledModule assemble(const ClosureResult &closure, const scanner::CorpusIndex &index,
                         const AssembleOptions &options) {
  if (!closure.unresolved.empty() && !options.allow_unresolved) {
    std::string msg = "unresolved names:";
    for (const auto &n : closure.unresolved)
      msg += " " + n;
    throw UnresolvedNames(msg);
  }
  check_collisions(closure);
  const auto order = topo_order(closure);

  AssembledModule m;
  m.target = closure.target;
  m.index_digest = options.index_digest;
  std::string &out = m.source;
  out = preamble(closure.target, options.index_digest);

  std::vector<const resolver::ImportRef *> imports;
  for (const auto &i : closure.imports)
    imports.push_back(&i);
  std::stable_sort(imports.begin(), imports.end(), [](const auto *a, const auto *b) {
    return std::tie(b->future, a->text) < std::tie(a->future, b->text);
  });
  for (const auto *imp : imports) {
    m.import_header.push_back(imp->text);
    const auto begin = static_cast<std::uint32_t>(out.size());
    out += imp->text;
    out += '\n';
    m.provenance.push_back({imp->text, "import", imp->unit_path, imp->span,
                            {begin, static_cast<std::uint32_t>(out.size())}});
  }

  bool first = true;
  bool prev_block = false;
  for (const auto i : order) {
    const DefinitionRef &d = closure.definitions[i];
    std::string text;
    bool block = false;
    ProvenanceEntry p;
    p.identity = d.id;
    p.unit = d.unit_path;
    if (d.synthesized) {
      text = d.text;
      p.kind = "alias";
      const auto *unit = index.unit(d.unit_path);
      const auto &item = unit->tree->top_level[d.item];
      p.origin = item.statement_span();
    } else {
      const auto *unit = index.unit(d.unit_path);
      if (!unit || !unit->ok())
        throw StoreError("unit " + d.unit_path + " is not available");
      const auto &item = unit->tree->top_level[d.item];
      text = std::string(unit->tree->text(item.full));
      if (text.empty() || text.back() != '\n')
        text += '\n';
      p.kind = "definition";
      p.origin = item.full;
      block = item.stmt && (item.stmt->kind == syntax::NodeKind::FunctionDef ||
                            item.stmt->kind == syntax::NodeKind::ClassDef);
    }
    // Separators only: two blank lines around defs and classes, one after
    // the import header. The carried text itself is untouched.
    std::size_t lead = 0;
    for (std::size_t k = 0; k < text.size() && text[k] == '\n'; ++k)
      ++lead;
    std::size_t need = 0;
    if (first)
      need = imports.empty() ? 0 : 1;
    else if (block || prev_block)
      need = 2;
    if (need > lead)
      out.append(need - lead, '\n');
    first = false;
    prev_block = block;
    const auto begin = static_cast<std::uint32_t>(out.size());
    out += text;
    p.emitted = {begin, static_cast<std::uint32_t>(out.size())};
    m.provenance.push_back(std::move(p));
  }
  m.sha1 = sha1_hex(out);
  return m;
}

json provenance_json(const AssembledModule &module, const ClosureResult &closure) {
  json entries = json::array();
  for (const auto &p : module.provenance)
    entries.push_back({{"identity", p.identity},
                       {"kind", p.kind},
                       {"unit", p.unit},
                       {"origin", {p.origin.begin, p.origin.end}},
                       {"emitted", {p.emitted.begin, p.emitted.end}}});
  return {{"target", module.target},
          {"sha1", module.sha1},
          {"index", module.index_digest},
          {"imports", module.import_header},
          {"provenance", entries},
          {"external", closure.external},
          {"unresolved", closure.unresolved},
          {"warnings", closure.warnings}};
}

std::string output_stem(const scanner::BlockCandidate &target, const scanner::CorpusIndex &index) {
  std::size_t same = 0;
  for (const auto &c : index.candidates)
    if (c.name == target.name)
      ++same;
  return same > 1 ? target.qualname : target.name;
}

} // namespace scopeweaver::assembler
