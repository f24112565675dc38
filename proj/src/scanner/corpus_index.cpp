#include "scopeweaver/scanner/corpus_index.hpp"

#include <algorithm>

#include "scopeweaver/digest.hpp"
#include "scopeweaver/errors.hpp"
#include "scopeweaver/fileio.hpp"
#include "scopeweaver/parallel.hpp"
#include "scopeweaver/scanner/scanner.hpp"
#include "scopeweaver/store/blob_store.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace scopeweaver::scanner {

using syntax::BindingSite;
using syntax::Node;
using syntax::NodeKind;

namespace {

constexpr int kMaxImportDepth = 32;

std::vector<std::string> split_dotted(const std::string &s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto dot = s.find('.', start);
    if (dot == std::string::npos) {
      parts.push_back(s.substr(start));
      break;
    }
    parts.push_back(s.substr(start, dot - start));
    start = dot + 1;
  }
  return parts;
}

// Final module-level binding site of `name`, preferring ordinary bindings
// over ones made from inside functions through `global`.
const BindingSite *final_site(const syntax::ScopeTable &scopes, const std::string &name) {
  const auto &bindings = scopes.module().bindings;
  auto it = bindings.find(name);
  if (it == bindings.end() || it->second.empty())
    return nullptr;
  const BindingSite *best = nullptr;
  for (const auto &site : it->second)
    if (!site.via_global && (!best || site.item >= best->item))
      best = &site;
  if (!best)
    best = &it->second.back();
  return best;
}

// Decodes a plain string literal token text; nullopt for anything fancier.
std::optional<std::string> simple_literal(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size() && (text[i] == 'u' || text[i] == 'U' || text[i] == 'r' || text[i] == 'R'))
    ++i;
  if (i >= text.size())
    return std::nullopt;
  const char q = text[i];
  if ((q != '\'' && q != '"') || text.size() < i + 2 || text.back() != q)
    return std::nullopt;
  std::string_view body = text.substr(i + 1, text.size() - i - 2);
  if (body.size() >= 4 && body[0] == q && body[1] == q)
    body = body.substr(2, body.size() - 4);
  if (body.find('\\') != std::string_view::npos || body.find(q) != std::string_view::npos)
    return std::nullopt;
  return std::string(body);
}

json unit_payload(const UnitRecord &u) {
  return {{"path", u.path},
          {"root", u.root},
          {"module", u.module},
          {"is_package", u.is_package},
          {"sha1", u.sha1},
          {"encoding", u.encoding},
          {"status", std::string(to_string(u.status))},
          {"error_class", u.error_class},
          {"error", u.error},
          {"imports", u.imports}};
}

json candidate_payload(const BlockCandidate &c) {
  return {{"qualname", c.qualname},
          {"name", c.name},
          {"unit", c.unit_path},
          {"unit_sha1", c.unit_sha1},
          {"span", {c.span.begin, c.span.end}},
          {"item", c.item},
          {"kind", c.kind == CandidateKind::Class ? "class" : "function"},
          {"bases", c.bases},
          {"has_forward", c.has_forward},
          {"is_abstract", c.is_abstract},
          {"is_module", c.is_module},
          {"eligible", c.eligible()},
          {"category", c.category}};
}

UnitStatus status_from(const std::string &s) {
  if (s == "ok")
    return UnitStatus::Ok;
  if (s == "unparseable")
    return UnitStatus::Unparseable;
  if (s == "unreadable")
    return UnitStatus::Unreadable;
  throw StoreError("unknown unit status '" + s + "'");
}

} // namespace

std::string_view to_string(UnitStatus s) noexcept {
  switch (s) {
  case UnitStatus::Ok: return "ok";
  case UnitStatus::Unparseable: return "unparseable";
  case UnitStatus::Unreadable: return "unreadable";
  }
  return "?";
}

bool is_import_item(const syntax::TopLevelItem &item) noexcept {
  const Node *s = item.stmt;
  if (!s)
    return false;
  if (s->kind == NodeKind::Import || s->kind == NodeKind::ImportFrom)
    return true;
  if (s->kind != NodeKind::SimpleStatements)
    return false;
  return std::all_of(s->children.begin(), s->children.end(), [](const Node *c) {
    return c->kind == NodeKind::Import || c->kind == NodeKind::ImportFrom;
  });
}

void CorpusIndex::reindex() {
  by_path_.clear();
  by_module_.clear();
  module_roots_.clear();
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto &u = units[i];
    by_path_[u.path] = i;
    if (u.status == UnitStatus::Unreadable || u.module.empty())
      continue;
    by_module_[{u.root, u.module}] = i;
    module_roots_[u.module].push_back(i);
  }
}

const UnitRecord *CorpusIndex::unit(const std::string &path) const {
  auto it = by_path_.find(path);
  return it == by_path_.end() ? nullptr : &units[it->second];
}

const UnitRecord *CorpusIndex::find_module(const std::string &module,
                                           const std::string &root) const {
  if (auto it = by_module_.find({root, module}); it != by_module_.end())
    return &units[it->second];
  auto it = module_roots_.find(module);
  if (it == module_roots_.end() || it->second.size() != 1)
    return nullptr;
  return &units[it->second.front()];
}

std::vector<const BlockCandidate *> CorpusIndex::find_targets(const std::string &target) const {
  std::vector<const BlockCandidate *> out;
  if (const auto sep = target.find("::"); sep != std::string::npos) {
    const std::string path = target.substr(0, sep);
    const std::string name = target.substr(sep + 2);
    for (const auto &c : candidates)
      if (c.unit_path == path && c.name == name)
        out.push_back(&c);
    return out;
  }
  for (const auto &c : candidates)
    if (c.qualname == target)
      out.push_back(&c);
  if (!out.empty())
    return out;
  if (target.find('.') != std::string::npos) {
    const std::string suffix = "." + target;
    for (const auto &c : candidates)
      if (c.qualname.size() > suffix.size() &&
          c.qualname.compare(c.qualname.size() - suffix.size(), suffix.size(), suffix) == 0)
        out.push_back(&c);
    return out;
  }
  for (const auto &c : candidates)
    if (c.name == target)
      out.push_back(&c);
  return out;
}

const BlockCandidate *CorpusIndex::candidate(const std::string &unit_path,
                                             std::uint32_t item) const {
  for (const auto &c : candidates)
    if (c.unit_path == unit_path && c.item == item)
      return &c;
  return nullptr;
}

std::optional<std::string> CorpusIndex::import_from_module(const UnitRecord &unit,
                                                           const Node &node) const {
  const std::uint32_t level = node.flags;
  if (level == 0)
    return node.value;
  std::vector<std::string> parts;
  if (!unit.module.empty())
    parts = split_dotted(unit.module);
  if (!unit.is_package && !parts.empty())
    parts.pop_back();
  for (std::uint32_t i = 1; i < level; ++i) {
    if (parts.empty())
      return std::nullopt;
    parts.pop_back();
  }
  std::string base;
  for (const auto &p : parts)
    base += (base.empty() ? "" : ".") + p;
  if (node.value.empty())
    return base.empty() ? std::nullopt : std::optional<std::string>(base);
  return base.empty() ? node.value : base + "." + node.value;
}

Export CorpusIndex::lookup(const UnitRecord &unit, const std::string &name) const {
  return lookup_depth(unit, name, 0);
}

Export CorpusIndex::resolve_import(const UnitRecord &unit, const BindingSite &site) const {
  return resolve_import_depth(unit, site, 0);
}

Export CorpusIndex::resolve_star(const UnitRecord &unit, const std::string &name) const {
  return resolve_star_depth(unit, name, 0);
}

Export CorpusIndex::lookup_depth(const UnitRecord &unit, const std::string &name,
                                 int depth) const {
  Export missing;
  missing.unit = &unit;
  missing.name = name;
  if (depth > kMaxImportDepth || !unit.ok())
    return missing;
  const BindingSite *site = final_site(*unit.scopes, name);
  if (!site)
    return resolve_star_depth(unit, name, depth);
  if (site->kind == syntax::SiteKind::Import && is_import_item(unit.tree->top_level[site->item]))
    return resolve_import_depth(unit, *site, depth);
  Export e;
  e.kind = Export::Kind::Definition;
  e.unit = &unit;
  e.item = site->item;
  e.name = name;
  return e;
}

Export CorpusIndex::resolve_import_depth(const UnitRecord &unit, const BindingSite &site,
                                         int depth) const {
  const Node *stmt = site.statement;
  const Node *alias = site.node;
  Export e;
  e.kind = Export::Kind::Import;
  e.unit = &unit;
  e.item = site.item;
  e.statement = stmt;
  e.alias = alias;
  e.name = syntax::bound_name(*alias);
  if (stmt->kind == NodeKind::Import) {
    e.in_index_module = find_module(alias->value, unit.root) != nullptr;
    return e;
  }
  const auto module = import_from_module(unit, *stmt);
  if (!module) {
    e.unresolved_relative = true;
    return e;
  }
  const UnitRecord *target = find_module(*module, unit.root);
  if (!target)
    return e;
  if (find_module(*module + "." + alias->value, unit.root)) {
    e.in_index_module = true;
    return e;
  }
  return lookup_depth(*target, alias->value, depth + 1);
}

Export CorpusIndex::resolve_star_depth(const UnitRecord &unit, const std::string &name,
                                       int depth) const {
  Export e;
  e.unit = &unit;
  e.name = name;
  if (depth > kMaxImportDepth || !unit.ok())
    return e;
  const auto &stars = unit.scopes->module().star_imports;
  std::vector<const Node *> external;
  for (auto it = stars.rbegin(); it != stars.rend(); ++it) {
    const Node *stmt = it->statement;
    const auto module = import_from_module(unit, *stmt);
    const UnitRecord *target = module ? find_module(*module, unit.root) : nullptr;
    if (!target) {
      external.insert(external.begin(), stmt);
      continue;
    }
    if (const auto all = literal_all(*target)) {
      if (std::find(all->begin(), all->end(), name) == all->end())
        continue;
    } else if (!name.empty() && name.front() == '_') {
      continue;
    }
    Export r = lookup_depth(*target, name, depth + 1);
    if (r.kind != Export::Kind::Missing)
      return r;
  }
  if (!external.empty()) {
    e.kind = Export::Kind::ExternalStar;
    e.star_statements = std::move(external);
  }
  return e;
}

std::optional<std::vector<std::string>> literal_all(const UnitRecord &unit) {
  if (!unit.ok())
    return std::nullopt;
  std::optional<std::vector<std::string>> names;
  auto collect = [&](const Node *value, bool extend) {
    if (!value || (value->kind != NodeKind::List && value->kind != NodeKind::Tuple))
      return;
    std::vector<std::string> out;
    for (const Node *elt : value->children) {
      if (elt->kind != NodeKind::Str)
        return;
      const auto lit = simple_literal(unit.tree->text(*elt));
      if (!lit)
        return;
      out.push_back(*lit);
    }
    if (extend && names)
      names->insert(names->end(), out.begin(), out.end());
    else
      names = std::move(out);
  };
  for (const auto &item : unit.tree->top_level) {
    const Node *s = item.stmt;
    if (s->kind == NodeKind::Assign) {
      for (const Node *t : s->children_with(syntax::Role::Target))
        if (t->kind == NodeKind::Name && t->value == "__all__")
          collect(s->child(syntax::Role::Value), false);
    } else if (s->kind == NodeKind::AugAssign) {
      const Node *t = s->child(syntax::Role::Target);
      if (t && t->kind == NodeKind::Name && t->value == "__all__")
        collect(s->child(syntax::Role::Value), true);
    }
  }
  return names;
}

std::vector<store::CatalogRecord> CorpusIndex::records() const {
  std::vector<store::CatalogRecord> out;
  for (const auto &u : units) {
    store::CatalogRecord r{"unit", unit_payload(u), std::nullopt};
    if (!u.sha1.empty())
      r.sha1 = u.sha1;
    out.push_back(std::move(r));
  }
  for (const auto &c : candidates)
    out.push_back({"candidate", candidate_payload(c), c.unit_sha1});
  return out;
}

std::string CorpusIndex::digest() const {
  std::string all;
  for (const auto &r : records())
    all += store::canonical_line(r);
  return sha1_hex(all);
}

void write_index(const CorpusIndex &index, const fs::path &dir) {
  store::BlobStore blobs(dir);
  for (const auto &u : index.units)
    if (u.bytes)
      blobs.put(*u.bytes);
  std::string catalog;
  for (const auto &r : index.records())
    catalog += store::canonical_line(r);
  try {
    write_file_atomic(dir / "catalog.jsonl", catalog);
  } catch (const IoError &e) {
    throw StoreError(e.what());
  }
}

CorpusIndex load_index(const fs::path &dir) {
  if (!fs::exists(dir / "catalog.jsonl"))
    throw StoreError("no index at " + dir.string() + " (missing catalog.jsonl)");
  store::Catalog catalog(dir / "catalog.jsonl");
  store::BlobStore blobs(dir);
  CorpusIndex index;
  std::vector<json> unit_payloads;
  for (const auto &r : catalog.records()) {
    if (r.kind == "unit") {
      unit_payloads.push_back(r.payload);
    } else if (r.kind == "candidate") {
      const auto &p = r.payload;
      BlockCandidate c;
      try {
        c.qualname = p.at("qualname");
        c.name = p.at("name");
        c.unit_path = p.at("unit");
        c.unit_sha1 = p.at("unit_sha1");
        c.span = {p.at("span").at(0).get<std::uint32_t>(), p.at("span").at(1).get<std::uint32_t>()};
        c.item = p.at("item");
        c.kind = p.at("kind") == "class" ? CandidateKind::Class : CandidateKind::Function;
        c.bases = p.at("bases").get<std::vector<std::string>>();
        c.has_forward = p.at("has_forward");
        c.is_abstract = p.at("is_abstract");
        c.is_module = p.at("is_module");
        c.category = p.at("category");
      } catch (const json::exception &e) {
        throw StoreError(std::string("malformed candidate record: ") + e.what());
      }
      index.candidates.push_back(std::move(c));
    }
  }
  index.units.resize(unit_payloads.size());
  parallel_for(unit_payloads.size(), 0, [&](std::size_t i) {
    const auto &p = unit_payloads[i];
    try {
      const UnitStatus status = status_from(p.at("status"));
      if (status == UnitStatus::Unreadable) {
        UnitRecord u;
        u.path = p.at("path");
        u.root = p.at("root");
        u.module = p.at("module");
        u.is_package = p.at("is_package");
        u.status = status;
        u.error_class = p.at("error_class");
        u.error = p.at("error");
        index.units[i] = std::move(u);
        return;
      }
      UnitRecord u = load_unit(p.at("path"), p.at("root"), p.at("module"), p.at("is_package"),
                               blobs.get(p.at("sha1")));
      u.imports = p.at("imports").get<std::vector<std::string>>();
      index.units[i] = std::move(u);
    } catch (const json::exception &e) {
      throw StoreError(std::string("malformed unit record: ") + e.what());
    }
  });
  index.reindex();
  for (const auto &u : index.units)
    for (const auto &imp : u.imports)
      index.import_edges.emplace_back(u.path, imp);
  return index;
}

} // namespace scopeweaver::scanner
