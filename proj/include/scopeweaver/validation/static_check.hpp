#pragma once

#include <string>
#include <vector>

#include "scopeweaver/assembler/assembler.hpp"
#include "scopeweaver/validation/report.hpp"

namespace scopeweaver::validation {

/// Names read anywhere in the module (annotations excepted) that resolve to
/// no binding, builtin, or star import. Sorted, unique.
std::vector<std::string> unresolved_names(const syntax::SyntaxTree &tree,
                                          const syntax::ScopeTable &scopes);

struct OrderViolation {
  std::string name;
  int line = 0;
};

/// Load-time reads of module-level names that happen before any binding
/// of the name has executed, scanning the module top to bottom.
std::vector<OrderViolation> load_time_order_violations(const syntax::SyntaxTree &tree,
                                                       const syntax::ScopeTable &scopes);

/// Parse stage plus unresolved-name and ordering analysis, in process.
ValidationReport validate_static(const std::string &qualname, const std::string &source);
ValidationReport validate_static(const assembler::AssembledModule &module);

} // namespace scopeweaver::validation
