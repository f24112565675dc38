#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace scopeweaver::specgate {

using ojson = nlohmann::ordered_json;

inline constexpr const char *kSchemaId = "trainspec.v1";

/// Top-level keys in canonical order; `scheduler` is the only optional one.
inline constexpr const char *kTopLevelKeys[] = {"task",     "dataset",       "metric",
                                                "epochs",   "model_ref",     "transform_ref",
                                                "loss",     "optimizer",     "scheduler",
                                                "hyperparameters"};
inline constexpr const char *kHyperparameterKeys[] = {"learning_rate", "momentum",
                                                      "weight_decay", "batch_size"};
inline constexpr const char *kOptimizers[] = {"adadelta", "adagrad", "adam",  "adamw",
                                              "nadam",    "radam",   "rmsprop", "sgd"};

enum class Status { Pass, Autofixed, Reject };
std::string_view to_string(Status s) noexcept;

struct Fix {
  std::string path;
  std::string rule; // StringToNumber | FloatToInt | KeyOrder | Alias | CaseNormalize
  ojson from;
  ojson to;
};

struct Diagnostic {
  std::string path;
  std::string rule; // Missing | Range | Type | UnknownKey | DuplicateKey | UnknownOptimizer | NotStructured
  ojson found;
  std::string expected;
};

struct GateOutcome {
  Status status = Status::Pass;
  std::vector<Fix> fixes;
  std::vector<Diagnostic> diagnostics;
  bool retry_allowed = false;
  std::optional<ojson> canonical; // absent when rejected

  ojson to_json() const;
};

/// Validates a YAML or JSON document. Errors are reported in the outcome;
/// this never throws for bad input.
GateOutcome validate_spec(std::string_view document);

/// Deterministic text of a canonical spec: compact JSON, LF-terminated.
std::string serialize(const ojson &canonical);

/// One retry per lineage. The optional file makes the counter shared
/// across processes (append-only JSONL under flock).
class RetryGate {
public:
  RetryGate() = default;
  explicit RetryGate(std::filesystem::path file);

  /// For a rejected outcome: true the first time a lineage is seen, false
  /// afterwards. Sets outcome.retry_allowed. Passing outcomes return false
  /// and consume nothing.
  bool check(GateOutcome &outcome, const std::string &lineage);
  std::uint64_t rejections(const std::string &lineage);

private:
  std::uint64_t bump(const std::string &lineage);

  std::optional<std::filesystem::path> file_;
  std::mutex mutex_;
  std::map<std::string, std::uint64_t> counts_;
};

} // namespace scopeweaver::specgate
