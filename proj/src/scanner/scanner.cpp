#include "scopeweaver/scanner/scanner.hpp"

#include <algorithm>
#include <set>

#include "scopeweaver/errors.hpp"
#include "scopeweaver/fileio.hpp"
#include "scopeweaver/parallel.hpp"

namespace fs = std::filesystem;

namespace scopeweaver::scanner {

using syntax::Node;
using syntax::NodeKind;
using syntax::Role;

namespace {

const std::set<std::string> kAbstractDecorators = {
    "abstractmethod", "abstractproperty", "abstractclassmethod", "abstractstaticmethod"};

struct FileEntry {
  std::string unit_path;
  fs::path file;
  std::string root;
  std::string module;
  bool is_package = false;
};

std::string module_name(const fs::path &rel, bool &is_package) {
  std::vector<std::string> parts;
  for (const auto &p : rel.parent_path())
    parts.push_back(p.string());
  const std::string stem = rel.stem().string();
  is_package = stem == "__init__";
  if (!is_package)
    parts.push_back(stem);
  std::string out;
  for (const auto &p : parts)
    out += (out.empty() ? "" : ".") + p;
  return out;
}

// Dotted source text of a Name/Attribute chain, or empty.
std::string dotted(const Node *n) {
  if (!n)
    return {};
  if (n->kind == NodeKind::Name)
    return n->value;
  if (n->kind == NodeKind::Attribute) {
    std::string base = dotted(n->child(Role::Value));
    return base.empty() ? std::string() : base + "." + n->value;
  }
  return {};
}

std::string last_component(const std::string &s) {
  const auto dot = s.rfind('.');
  return dot == std::string::npos ? s : s.substr(dot + 1);
}

// Rewrites the first component of a dotted name through the unit's imports:
// with `import torch.nn as nn`, "nn.Module" becomes "torch.nn.Module".
std::string resolve_dotted(const CorpusIndex &index, const UnitRecord &unit,
                           const std::string &name) {
  const auto dot = name.find('.');
  const std::string head = name.substr(0, dot);
  const std::string rest = dot == std::string::npos ? "" : name.substr(dot);
  const auto &bindings = unit.scopes->module().bindings;
  auto it = bindings.find(head);
  if (it == bindings.end())
    return name;
  const syntax::BindingSite *site = nullptr;
  for (const auto &s : it->second)
    if (!s.via_global)
      site = &s;
  if (!site || site->kind != syntax::SiteKind::Import)
    return name;
  const Node *alias = site->node;
  if (site->statement->kind == NodeKind::Import)
    return (alias->extra.empty() ? head : alias->value) + rest;
  auto module = index.import_from_module(unit, *site->statement);
  std::string base = module ? *module : site->statement->value;
  return (base.empty() ? "" : base + ".") + alias->value + rest;
}

bool matches_base(const std::vector<std::string> &patterns, const std::string &raw,
                  const std::string &resolved) {
  return std::find(patterns.begin(), patterns.end(), raw) != patterns.end() ||
         std::find(patterns.begin(), patterns.end(), resolved) != patterns.end();
}

std::vector<const Node *> body_statements(const Node *cls) {
  std::vector<const Node *> out;
  for (const Node *s : cls->children_with(Role::Body)) {
    if (s->kind == NodeKind::SimpleStatements)
      for (const Node *c : s->children)
        out.push_back(c);
    else
      out.push_back(s);
  }
  return out;
}

bool defines_forward(const Node *cls) {
  for (const Node *s : body_statements(cls)) {
    if (s->kind == NodeKind::FunctionDef && s->value == "forward")
      return true;
    if (s->kind == NodeKind::Assign)
      for (const Node *t : s->children_with(Role::Target))
        if (t->kind == NodeKind::Name && t->value == "forward")
          return true;
  }
  return false;
}

bool is_abstract_class(const CorpusIndex &index, const UnitRecord &unit, const Node *cls) {
  for (const Node *s : body_statements(cls)) {
    if (s->kind != NodeKind::FunctionDef)
      continue;
    for (const Node *d : s->children_with(Role::Decorator)) {
      const Node *target = d->kind == NodeKind::Call ? d->child(Role::Func) : d;
      if (kAbstractDecorators.count(last_component(dotted(target))))
        return true;
    }
  }
  for (const Node *b : cls->children_with(Role::Base)) {
    const std::string raw = dotted(b);
    if (raw.empty())
      continue;
    const std::string resolved = resolve_dotted(index, unit, raw);
    if (raw == "ABC" || resolved == "abc.ABC")
      return true;
  }
  for (const Node *k : cls->children_with(Role::Keyword)) {
    if (k->kind != NodeKind::Keyword || k->value != "metaclass")
      continue;
    const std::string raw = dotted(k->child(Role::Value));
    if (raw == "ABCMeta" || resolve_dotted(index, unit, raw) == "abc.ABCMeta")
      return true;
  }
  return false;
}

std::string qualname_prefix(const std::string &unit_path) {
  std::string p = unit_path;
  const auto dot = p.rfind('.');
  const auto slash = p.rfind('/');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash))
    p.resize(dot);
  std::replace(p.begin(), p.end(), '/', '.');
  const std::string init = ".__init__";
  if (p.size() > init.size() && p.compare(p.size() - init.size(), init.size(), init) == 0)
    p.resize(p.size() - init.size());
  return p;
}

// Candidate a base expression refers to, following in-index imports.
const BlockCandidate *base_candidate(const CorpusIndex &index, const UnitRecord &unit,
                                     const Node *base) {
  Export e;
  if (base->kind == NodeKind::Name) {
    e = index.lookup(unit, base->value);
  } else if (base->kind == NodeKind::Attribute && base->child(Role::Value)->kind == NodeKind::Name) {
    Export mod = index.lookup(unit, base->child(Role::Value)->value);
    if (mod.kind != Export::Kind::Import || !mod.in_index_module)
      return nullptr;
    const UnitRecord *m = nullptr;
    if (mod.statement->kind == NodeKind::Import) {
      m = index.find_module(mod.alias->value, mod.unit->root);
    } else if (auto abs = index.import_from_module(*mod.unit, *mod.statement)) {
      m = index.find_module(*abs + "." + mod.alias->value, mod.unit->root);
    }
    if (!m)
      return nullptr;
    e = index.lookup(*m, base->value);
  } else {
    return nullptr;
  }
  if (e.kind != Export::Kind::Definition)
    return nullptr;
  return index.candidate(e.unit->path, e.item);
}

std::vector<std::string> unit_imports(const CorpusIndex &index, const UnitRecord &unit) {
  std::set<std::string> out;
  auto add = [&](const UnitRecord *u) {
    if (u && u->path != unit.path)
      out.insert(u->path);
  };
  for (const auto &scope : unit.scopes->scopes) {
    for (const auto &[name, sites] : scope.bindings) {
      for (const auto &site : sites) {
        if (site.kind != syntax::SiteKind::Import)
          continue;
        const Node *alias = site.node;
        if (site.statement->kind == NodeKind::Import) {
          std::string m = alias->value;
          const UnitRecord *found = nullptr;
          while (!m.empty() && !(found = index.find_module(m, unit.root))) {
            const auto dot = m.rfind('.');
            m = dot == std::string::npos ? "" : m.substr(0, dot);
          }
          add(found);
        } else if (auto abs = index.import_from_module(unit, *site.statement)) {
          const UnitRecord *sub = index.find_module(*abs + "." + alias->value, unit.root);
          add(sub ? sub : index.find_module(*abs, unit.root));
        }
      }
    }
    for (const auto &star : scope.star_imports)
      if (auto abs = index.import_from_module(unit, *star.statement))
        add(index.find_module(*abs, unit.root));
  }
  return {out.begin(), out.end()};
}

} // namespace

UnitRecord load_unit(std::string path, std::string root, std::string module, bool is_package,
                     std::string bytes) {
  UnitRecord u;
  u.root = std::move(root);
  u.module = std::move(module);
  u.is_package = is_package;
  auto source = syntax::SourceUnit::from_bytes(std::move(path), std::move(bytes));
  u.path = source.path;
  u.sha1 = source.sha1;
  u.encoding = source.encoding;
  try {
    auto tree = std::make_shared<syntax::SyntaxTree>(syntax::parse_lossless(source));
    u.scopes = std::make_shared<syntax::ScopeTable>(syntax::build_scopes(*tree));
    u.tree = std::move(tree);
  } catch (const Error &e) {
    u.status = UnitStatus::Unparseable;
    u.error_class = e.error_class();
    u.error = e.what();
    u.tree.reset();
    u.scopes.reset();
  }
  u.bytes = std::make_shared<const std::string>(std::move(source.bytes));
  return u;
}

std::string classify_category(const BlockCandidate &candidate, const ScanConfig &config) {
  return CategoryClassifier(config.category_rules).classify(candidate.name, candidate.bases);
}

void discover_candidates(CorpusIndex &index, const ScanConfig &config) {
  const CategoryClassifier classifier(config.category_rules);
  index.candidates.clear();
  for (const auto &unit : index.units) {
    if (!unit.ok())
      continue;
    const std::string prefix = qualname_prefix(unit.path);
    for (const auto &item : unit.tree->top_level) {
      const Node *s = item.stmt;
      if (s->kind != NodeKind::ClassDef && s->kind != NodeKind::FunctionDef)
        continue;
      BlockCandidate c;
      c.name = s->value;
      c.qualname = prefix + "." + s->value;
      c.unit_path = unit.path;
      c.unit_sha1 = unit.sha1;
      c.span = {s->begin, s->end};
      c.item = item.index;
      if (s->kind == NodeKind::ClassDef) {
        c.kind = CandidateKind::Class;
        for (const Node *b : s->children_with(Role::Base)) {
          const std::string raw(unit.tree->text(*b));
          c.bases.push_back(raw);
          const std::string d = dotted(b);
          if (!d.empty() &&
              matches_base(config.base_patterns, d, resolve_dotted(index, unit, d)))
            c.is_module = true;
        }
        c.has_forward = defines_forward(s);
        c.is_abstract = is_abstract_class(index, unit, s);
      } else {
        c.kind = CandidateKind::Function;
      }
      c.category = classifier.classify(c.name, c.bases);
      index.candidates.push_back(std::move(c));
    }
  }
  // Subclasses of indexed module classes are modules too.
  for (bool changed = true; changed;) {
    changed = false;
    for (auto &c : index.candidates) {
      if (c.kind != CandidateKind::Class || c.is_module)
        continue;
      const UnitRecord *unit = index.unit(c.unit_path);
      const Node *cls = unit->tree->top_level[c.item].stmt;
      for (const Node *b : cls->children_with(Role::Base)) {
        const BlockCandidate *base = base_candidate(index, *unit, b);
        if (base && base != &c && base->is_module) {
          c.is_module = true;
          changed = true;
          break;
        }
      }
    }
  }
  std::sort(index.candidates.begin(), index.candidates.end(),
            [](const BlockCandidate &a, const BlockCandidate &b) {
              return std::tie(a.qualname, a.unit_path, a.item) <
                     std::tie(b.qualname, b.unit_path, b.item);
            });
}

CorpusIndex scan(const std::vector<fs::path> &roots, const ScanConfig &config, unsigned jobs) {
  std::vector<FileEntry> files;
  std::set<std::string> root_names;
  for (const auto &root : roots) {
    std::error_code ec;
    if (!fs::is_directory(root, ec))
      throw IoError("not a readable directory: " + root.string());
    const fs::path canonical = fs::weakly_canonical(root, ec);
    std::string name = canonical.filename().string();
    if (name.empty())
      name = "root";
    const std::string base = name;
    for (int k = 2; root_names.count(name); ++k)
      name = base + "-" + std::to_string(k);
    root_names.insert(name);
    for (fs::recursive_directory_iterator it(canonical, fs::directory_options::skip_permission_denied, ec), end;
         it != end; it.increment(ec)) {
      if (ec)
        break;
      if (!it->is_regular_file(ec))
        continue;
      const auto ext = it->path().extension().string();
      if (std::find(config.extensions.begin(), config.extensions.end(), ext) ==
          config.extensions.end())
        continue;
      const fs::path rel = it->path().lexically_relative(canonical);
      FileEntry f;
      f.unit_path = name + "/" + rel.generic_string();
      f.file = it->path();
      f.root = name;
      f.module = module_name(rel, f.is_package);
      files.push_back(std::move(f));
    }
  }
  std::sort(files.begin(), files.end(),
            [](const FileEntry &a, const FileEntry &b) { return a.unit_path < b.unit_path; });

  CorpusIndex index;
  index.units.resize(files.size());
  parallel_for(files.size(), jobs, [&](std::size_t i) {
    const auto &f = files[i];
    std::string bytes;
    try {
      bytes = read_file(f.file);
    } catch (const IoError &e) {
      UnitRecord u;
      u.path = f.unit_path;
      u.root = f.root;
      u.module = f.module;
      u.is_package = f.is_package;
      u.status = UnitStatus::Unreadable;
      u.error_class = e.error_class();
      u.error = e.what();
      index.units[i] = std::move(u);
      return;
    }
    index.units[i] = load_unit(f.unit_path, f.root, f.module, f.is_package, std::move(bytes));
  });
  index.reindex();
  for (auto &u : index.units) {
    if (!u.ok())
      continue;
    u.imports = unit_imports(index, u);
    for (const auto &imp : u.imports)
      index.import_edges.emplace_back(u.path, imp);
  }
  discover_candidates(index, config);
  return index;
}

} // namespace scopeweaver::scanner
