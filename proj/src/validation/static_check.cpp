#include "scopeweaver/validation/static_check.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include "scopeweaver/digest.hpp"
#include "scopeweaver/errors.hpp"
#include "scopeweaver/syntax/scope.hpp"

namespace scopeweaver::validation {

using syntax::NodeKind;
using syntax::Resolution;

std::vector<std::string> unresolved_names(const syntax::SyntaxTree &,
                                          const syntax::ScopeTable &scopes) {
  std::set<std::string> out;
  for (syntax::ScopeId sid = 0; sid < scopes.scopes.size(); ++sid)
    for (const auto &use : scopes.scopes[sid].uses) {
      if (use.annotation)
        continue;
      if (syntax::resolve_name(use.name, sid, scopes).resolution == Resolution::Unresolved)
        out.insert(use.name);
    }
  return {out.begin(), out.end()};
}

namespace {

// Assignment targets bind after the value is evaluated; in compound
// statements (for targets, with-as, walrus) the target binds before the
// body that follows it.
bool binds_before(const syntax::BindingSite &site, const syntax::NameUse &use) {
  if (site.item != use.item)
    return site.item < use.item;
  const auto *stmt = site.statement;
  if (stmt->end <= use.node->begin)
    return true;
  switch (stmt->kind) {
  case NodeKind::Assign:
  case NodeKind::AugAssign:
  case NodeKind::AnnAssign:
  case NodeKind::FunctionDef:
  case NodeKind::ClassDef:
  case NodeKind::Import:
  case NodeKind::ImportFrom:
    return false;
  default:
    return site.node->end <= use.node->begin;
  }
}

} // namespace

std::vector<OrderViolation> load_time_order_violations(const syntax::SyntaxTree &tree,
                                                       const syntax::ScopeTable &scopes) {
  std::vector<OrderViolation> out;
  const auto &module = scopes.module();
  for (syntax::ScopeId sid = 0; sid < scopes.scopes.size(); ++sid)
    for (const auto &use : scopes.scopes[sid].uses) {
      if (!use.load_time || use.annotation)
        continue;
      if (syntax::resolve_name(use.name, sid, scopes).resolution != Resolution::Global)
        continue;
      auto it = module.bindings.find(use.name);
      if (it == module.bindings.end())
        continue;
      const bool ok = std::any_of(it->second.begin(), it->second.end(),
                                  [&](const auto &site) { return binds_before(site, use); });
      if (!ok)
        out.push_back({use.name, syntax::line_of(tree.source(), use.node->begin)});
    }
  std::sort(out.begin(), out.end(), [](const OrderViolation &a, const OrderViolation &b) {
    return std::tie(a.line, a.name) < std::tie(b.line, b.name);
  });
  return out;
}

ValidationReport validate_static(const std::string &qualname, const std::string &source) {
  ValidationReport r;
  r.qualname = qualname;
  r.module_sha1 = sha1_hex(source);
  StageResult parse{"parse", true, {}, {}, 0};
  const auto t0 = std::chrono::steady_clock::now();
  try {
    auto tree = syntax::parse_source(qualname + ".py", source);
    auto scopes = syntax::build_scopes(tree);
    r.unresolved = unresolved_names(tree, scopes);
    for (const auto &v : load_time_order_violations(tree, scopes))
      r.order_violations.push_back(v.name + "@" + std::to_string(v.line));
  } catch (const SyntaxError &e) {
    parse.ok = false;
    parse.error_class = "SyntaxError";
    parse.message = e.what();
  } catch (const EncodingError &e) {
    parse.ok = false;
    parse.error_class = "SyntaxError";
    parse.message = e.what();
  } catch (const ScopeError &e) {
    parse.ok = false;
    parse.error_class = "SyntaxError";
    parse.message = e.what();
  }
  parse.duration_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (parse.ok && !r.unresolved.empty())
    parse.message = "unresolved: " + r.unresolved.front();
  else if (parse.ok && !r.order_violations.empty())
    parse.message = "used before binding: " + r.order_violations.front();
  r.stages.push_back(std::move(parse));
  return r;
}

ValidationReport validate_static(const assembler::AssembledModule &module) {
  return validate_static(module.target, module.source);
}

} // namespace scopeweaver::validation
