#include "scopeweaver/syntax/scope.hpp"

#include "scopeweaver/errors.hpp"
#include "scopeweaver/syntax/builtins.hpp"

namespace scopeweaver::syntax {

std::string_view to_string(ScopeKind kind) noexcept {
  switch (kind) {
  case ScopeKind::Module: return "module";
  case ScopeKind::Class: return "class";
  case ScopeKind::Function: return "function";
  case ScopeKind::Lambda: return "lambda";
  case ScopeKind::Comprehension: return "comprehension";
  }
  return "?";
}

std::string_view to_string(SiteKind kind) noexcept {
  switch (kind) {
  case SiteKind::Definition: return "definition";
  case SiteKind::Import: return "import";
  case SiteKind::Parameter: return "parameter";
  case SiteKind::Assignment: return "assignment";
  }
  return "?";
}

std::string_view to_string(Resolution r) noexcept {
  switch (r) {
  case Resolution::Local: return "local";
  case Resolution::Enclosing: return "enclosing";
  case Resolution::Global: return "global";
  case Resolution::Builtin: return "builtin";
  case Resolution::External: return "external";
  case Resolution::Unresolved: return "unresolved";
  }
  return "?";
}

std::string bound_name(const Node &alias) {
  if (!alias.extra.empty())
    return alias.extra;
  const auto dot = alias.value.find('.');
  return dot == std::string::npos ? alias.value : alias.value.substr(0, dot);
}

ScopeId ScopeTable::scope_of(const Node *node) const {
  for (ScopeId i = 0; i < scopes.size(); ++i)
    if (scopes[i].node == node)
      return i;
  return kNoScope;
}

namespace {

class Binder {
public:
  explicit Binder(const SyntaxTree &tree) : tree_(tree) {
    Scope mod;
    mod.kind = ScopeKind::Module;
    mod.name = tree.path;
    table_.scopes.push_back(std::move(mod));
  }

  ScopeTable run() {
    for (const auto &item : tree_.top_level) {
      item_ = item.index;
      visit_stmt(item.stmt, 0, false, item.stmt);
    }
    check_nonlocals();
    return std::move(table_);
  }

private:
  ScopeId open(ScopeKind kind, const std::string &name, ScopeId parent, const Node *node) {
    const auto id = static_cast<ScopeId>(table_.scopes.size());
    Scope s;
    s.kind = kind;
    s.name = name;
    s.parent = parent;
    s.node = node;
    table_.scopes.push_back(std::move(s));
    table_.scopes[parent].children.push_back(id);
    return id;
  }

  void bind(ScopeId scope, const std::string &name, SiteKind kind, const Node *node,
            const Node *stmt) {
    Scope &s = table_.scopes[scope];
    BindingSite site{kind, node, stmt, item_};
    if (s.kind != ScopeKind::Module && s.globals.count(name)) {
      site.via_global = true;
      table_.scopes[0].bindings[name].push_back(site);
      return;
    }
    if (s.nonlocals.count(name))
      return;
    s.bindings[name].push_back(site);
  }

  void use(ScopeId scope, const Node *node, bool deferred, bool annotation) {
    table_.scopes[scope].uses.push_back(
        NameUse{node->value, node, item_, !deferred, annotation});
  }

  ScopeId non_comprehension(ScopeId scope) const {
    while (table_.scopes[scope].kind == ScopeKind::Comprehension)
      scope = table_.scopes[scope].parent;
    return scope;
  }

  void visit_body(const Node *n, Role role, ScopeId scope, bool deferred) {
    for (const Node *c : n->children)
      if (c->role == role)
        visit_stmt(c, scope, deferred, c);
  }

  void visit_params(const Node *params, ScopeId outer, ScopeId inner, bool deferred,
                    const Node *stmt) {
    for (const Node *arg : params->children) {
      for (const Node *c : arg->children) {
        if (c->role == Role::Default)
          visit_expr(c, outer, deferred, false, stmt);
        else if (c->role == Role::Annotation)
          visit_expr(c, outer, deferred, true, stmt);
      }
      bind(inner, arg->value, SiteKind::Parameter, arg, stmt);
    }
  }

  void visit_stmt(const Node *n, ScopeId scope, bool deferred, const Node *stmt) {
    switch (n->kind) {
    case NodeKind::FunctionDef: {
      for (const Node *d : n->children_with(Role::Decorator))
        visit_expr(d, scope, deferred, false, n);
      if (const Node *r = n->child(Role::Returns))
        visit_expr(r, scope, deferred, true, n);
      const ScopeId fn = open(ScopeKind::Function, n->value, scope, n);
      visit_params(n->child(Role::Params), scope, fn, deferred, n);
      bind(scope, n->value, SiteKind::Definition, n, n);
      visit_body(n, Role::Body, fn, true);
      return;
    }
    case NodeKind::ClassDef: {
      for (const Node *c : n->children)
        if (c->role == Role::Decorator || c->role == Role::Base || c->role == Role::Keyword)
          visit_expr(c, scope, deferred, false, n);
      const ScopeId cls = open(ScopeKind::Class, n->value, scope, n);
      visit_body(n, Role::Body, cls, deferred);
      bind(scope, n->value, SiteKind::Definition, n, n);
      return;
    }
    case NodeKind::Import:
      for (const Node *alias : n->children)
        bind(scope, bound_name(*alias), SiteKind::Import, alias, n);
      return;
    case NodeKind::ImportFrom:
      for (const Node *alias : n->children) {
        if (alias->value == "*")
          table_.scopes[scope].star_imports.push_back(StarImport{n, item_});
        else
          bind(scope, bound_name(*alias), SiteKind::Import, alias, n);
      }
      return;
    case NodeKind::Global:
      for (const Node *id : n->children)
        table_.scopes[scope].globals.insert(id->value);
      return;
    case NodeKind::Nonlocal:
      if (table_.scopes[scope].kind == ScopeKind::Module)
        throw ScopeError("nonlocal declaration not allowed at module level");
      for (const Node *id : n->children)
        table_.scopes[scope].nonlocals.insert(id->value);
      return;
    case NodeKind::AnnAssign: {
      const Node *target = n->child(Role::Target);
      const Node *value = n->child(Role::Value);
      visit_expr(n->child(Role::Annotation), scope, deferred, true, stmt);
      if (value)
        visit_expr(value, scope, deferred, false, stmt);
      if (target->kind == NodeKind::Name) {
        if (value || table_.scopes[scope].kind != ScopeKind::Module)
          bind(scope, target->value, SiteKind::Assignment, target, stmt);
      } else {
        visit_expr(target, scope, deferred, false, stmt);
      }
      return;
    }
    case NodeKind::AugAssign: {
      const Node *target = n->child(Role::Target);
      visit_expr(n->child(Role::Value), scope, deferred, false, stmt);
      if (target->kind == NodeKind::Name) {
        use(scope, target, deferred, false);
        bind(scope, target->value, SiteKind::Assignment, target, stmt);
      } else {
        visit_expr(target, scope, deferred, false, stmt);
      }
      return;
    }
    case NodeKind::Assign:
      visit_expr(n->child(Role::Value), scope, deferred, false, stmt);
      for (const Node *t : n->children_with(Role::Target))
        visit_expr(t, scope, deferred, false, stmt);
      return;
    case NodeKind::For:
      visit_expr(n->child(Role::Iter), scope, deferred, false, stmt);
      visit_expr(n->child(Role::Target), scope, deferred, false, stmt);
      visit_body(n, Role::Body, scope, deferred);
      visit_body(n, Role::OrElse, scope, deferred);
      return;
    case NodeKind::While:
    case NodeKind::If:
      visit_expr(n->child(Role::Test), scope, deferred, false, stmt);
      visit_body(n, Role::Body, scope, deferred);
      visit_body(n, Role::OrElse, scope, deferred);
      return;
    case NodeKind::With:
      for (const Node *item : n->children_with(Role::Item))
        for (const Node *c : item->children)
          visit_expr(c, scope, deferred, false, stmt);
      visit_body(n, Role::Body, scope, deferred);
      return;
    case NodeKind::Try:
      visit_body(n, Role::Body, scope, deferred);
      for (const Node *h : n->children_with(Role::Handler)) {
        if (const Node *type = h->child(Role::Type))
          visit_expr(type, scope, deferred, false, h);
        if (!h->value.empty())
          bind(scope, h->value, SiteKind::Assignment, h, h);
        visit_body(h, Role::Body, scope, deferred);
      }
      visit_body(n, Role::OrElse, scope, deferred);
      visit_body(n, Role::FinalBody, scope, deferred);
      return;
    case NodeKind::Match:
      visit_expr(n->child(Role::Subject), scope, deferred, false, stmt);
      for (const Node *c : n->children_with(Role::Case)) {
        visit_pattern(c->child(Role::Pattern), scope, deferred, stmt);
        if (const Node *g = c->child(Role::Guard))
          visit_expr(g, scope, deferred, false, stmt);
        visit_body(c, Role::Body, scope, deferred);
      }
      return;
    case NodeKind::Delete:
      for (const Node *t : n->children) {
        if (t->kind == NodeKind::Name && table_.scopes[scope].kind != ScopeKind::Module)
          bind(scope, t->value, SiteKind::Assignment, t, stmt);
        else if (t->kind == NodeKind::Name)
          use(scope, t, deferred, false);
        else
          visit_expr(t, scope, deferred, false, stmt);
      }
      return;
    case NodeKind::SimpleStatements:
      for (const Node *c : n->children)
        visit_stmt(c, scope, deferred, c);
      return;
    default:
      for (const Node *c : n->children)
        visit_expr(c, scope, deferred, false, stmt);
      return;
    }
  }

  void visit_pattern(const Node *p, ScopeId scope, bool deferred, const Node *stmt) {
    switch (p->kind) {
    case NodeKind::MatchAs:
    case NodeKind::MatchStar:
    case NodeKind::MatchMapping:
      if (!p->value.empty())
        bind(scope, p->value, SiteKind::Assignment, p, stmt);
      break;
    case NodeKind::MatchValue:
      visit_expr(p->children.front(), scope, deferred, false, stmt);
      return;
    case NodeKind::MatchClass:
      visit_expr(p->child(Role::Func), scope, deferred, false, stmt);
      break;
    default:
      break;
    }
    for (const Node *c : p->children) {
      if (c->role == Role::Pattern)
        visit_pattern(c, scope, deferred, stmt);
      else if (c->role == Role::Key)
        visit_expr(c, scope, deferred, false, stmt);
      else if (c->role == Role::Keyword)
        visit_pattern(c->child(Role::Pattern), scope, deferred, stmt);
    }
  }

  void visit_comprehension(const Node *n, ScopeId scope, bool deferred, const Node *stmt) {
    const auto gens = n->children_with(Role::Generator);
    // The outermost iterable is evaluated in the enclosing scope.
    visit_expr(gens.front()->child(Role::Iter), scope, deferred, false, stmt);
    const ScopeId comp = open(ScopeKind::Comprehension, std::string(to_string(n->kind)),
                              scope, n);
    for (std::size_t i = 0; i < gens.size(); ++i) {
      const Node *g = gens[i];
      if (i > 0)
        visit_expr(g->child(Role::Iter), comp, deferred, false, stmt);
      visit_expr(g->child(Role::Target), comp, deferred, false, stmt);
      for (const Node *cond : g->children_with(Role::Condition))
        visit_expr(cond, comp, deferred, false, stmt);
    }
    for (const Node *c : n->children)
      if (c->role == Role::Elt || c->role == Role::Key || c->role == Role::Value)
        visit_expr(c, comp, deferred, false, stmt);
  }

  void visit_expr(const Node *n, ScopeId scope, bool deferred, bool annotation,
                  const Node *stmt) {
    switch (n->kind) {
    case NodeKind::Name:
      if (n->ctx() == Ctx::Load)
        use(scope, n, deferred, annotation);
      else if (n->ctx() == Ctx::Store)
        bind(scope, n->value, SiteKind::Assignment, n, stmt);
      else if (table_.scopes[scope].kind != ScopeKind::Module)
        bind(scope, n->value, SiteKind::Assignment, n, stmt);
      else
        use(scope, n, deferred, annotation);
      return;
    case NodeKind::Lambda: {
      const ScopeId fn = open(ScopeKind::Lambda, "<lambda>", scope, n);
      visit_params(n->child(Role::Params), scope, fn, deferred, stmt);
      visit_expr(n->child(Role::Body), fn, true, false, stmt);
      return;
    }
    case NodeKind::ListComp:
    case NodeKind::SetComp:
    case NodeKind::DictComp:
    case NodeKind::GeneratorExp:
      visit_comprehension(n, scope, deferred, stmt);
      return;
    case NodeKind::NamedExpr:
      visit_expr(n->child(Role::Value), scope, deferred, annotation, stmt);
      bind(non_comprehension(scope), n->child(Role::Target)->value,
           SiteKind::Assignment, n->child(Role::Target), stmt);
      return;
    default:
      for (const Node *c : n->children)
        visit_expr(c, scope, deferred, annotation, stmt);
      return;
    }
  }

  void check_nonlocals() const {
    for (const Scope &s : table_.scopes) {
      for (const auto &name : s.nonlocals) {
        bool found = false;
        for (ScopeId p = s.parent; p != kNoScope && !found; p = table_.scopes[p].parent) {
          const Scope &ps = table_.scopes[p];
          if (ps.kind == ScopeKind::Module)
            break;
          if (ps.kind == ScopeKind::Class)
            continue;
          found = ps.binds(name) || ps.nonlocals.count(name);
        }
        if (!found)
          throw ScopeError("no binding for nonlocal '" + name + "' found");
      }
    }
  }

  const SyntaxTree &tree_;
  ScopeTable table_;
  std::uint32_t item_ = 0;
};

Binding global_lookup(const std::string &name, const ScopeTable &table) {
  Binding b;
  b.name = name;
  const Scope &mod = table.module();
  if (auto it = mod.bindings.find(name); it != mod.bindings.end()) {
    b.resolution = Resolution::Global;
    b.scope = 0;
    b.sites = it->second;
  } else if (is_builtin_name(name)) {
    b.resolution = Resolution::Builtin;
  } else if (!mod.star_imports.empty()) {
    b.resolution = Resolution::External;
  }
  return b;
}

} // namespace

ScopeTable build_scopes(const SyntaxTree &tree) { return Binder(tree).run(); }

Binding resolve_name(const std::string &name, ScopeId scope, const ScopeTable &table) {
  const Scope &s = table.at(scope);
  if (s.kind == ScopeKind::Module || s.globals.count(name))
    return global_lookup(name, table);
  if (!s.nonlocals.count(name)) {
    if (auto it = s.bindings.find(name); it != s.bindings.end())
      return Binding{name, Resolution::Local, scope, it->second};
  }
  for (ScopeId p = s.parent; p != kNoScope; p = table.at(p).parent) {
    const Scope &ps = table.at(p);
    if (ps.kind == ScopeKind::Module)
      break;
    if (ps.kind == ScopeKind::Class)
      continue;
    if (ps.globals.count(name))
      return global_lookup(name, table);
    if (ps.nonlocals.count(name))
      continue;
    if (auto it = ps.bindings.find(name); it != ps.bindings.end())
      return Binding{name, Resolution::Enclosing, p, it->second};
  }
  return global_lookup(name, table);
}

} // namespace scopeweaver::syntax
