#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "scopeweaver/scanner/corpus_index.hpp"

namespace scopeweaver::validation {

/// Closed error taxonomy used in reports.
inline constexpr const char *kErrorClasses[] = {"SyntaxError", "NameError",      "ImportError",
                                                "AttributeError", "Timeout", "SandboxFailure",
                                                "Other"};

/// Maps an exception type name to the taxonomy.
std::string classify_error(const std::string &exception_name);

struct StageResult {
  std::string name; // parse | compile | import
  bool ok = false;
  std::string error_class; // empty when ok
  std::string message;
  double duration_ms = 0;
};

struct ValidationReport {
  std::string qualname;
  std::string unit_path;
  std::string module_sha1;
  std::vector<StageResult> stages;
  std::vector<std::string> unresolved;        // names bound nowhere in the module
  std::vector<std::string> order_violations;  // load-time reads before their binding
  bool external_only = false; // failed only on a package outside the allowlist

  bool admitted() const;
  /// Stage that rejected the module, or empty when admitted. A module whose
  /// stages all pass but that has unresolved names is rejected at "parse".
  std::string rejected_stage() const;
  /// Error class of the rejecting stage, or empty when admitted.
  std::string error_class() const;

  /// Durations are wall-clock and left out unless asked for, so that stored
  /// reports stay reproducible.
  nlohmann::json to_json(bool with_durations = false) const;
  static ValidationReport from_json(const nlohmann::json &j);
};

struct CategoryStats {
  std::size_t total = 0;
  std::size_t admitted = 0;
};

struct FailureEntry {
  std::string qualname;
  std::string stage;
  std::string error_class;
  bool external_only = false;
};

struct ExecutabilityStats {
  std::size_t total = 0;
  std::size_t admitted = 0;
  double rate = 0; // admitted / total, 0 for an empty run
  std::map<std::string, CategoryStats> per_category;
  std::vector<FailureEntry> failures; // sorted by qualname
  std::size_t external_only = 0;
  double adjusted_rate = 0; // admitted / (total - external_only)

  nlohmann::json to_json() const;
  /// Canonical text: sorted keys, compact, LF-terminated.
  std::string serialize() const;
};

/// Joins reports to candidates by qualname (and unit path when present).
/// A later report for the same candidate replaces an earlier one. Throws
/// JoinError for a report matching no candidate or several.
ExecutabilityStats executability_report(const std::vector<ValidationReport> &reports,
                                        const std::vector<scanner::BlockCandidate> &candidates);

} // namespace scopeweaver::validation
