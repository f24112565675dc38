#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "scopeweaver/resolver/dependency_graph.hpp"

namespace scopeweaver::resolver {

enum class EdgeKind : std::uint8_t { LoadTime, Deferred, Annotation, Rebinding };

std::string_view to_string(EdgeKind kind) noexcept;

/// One definition of a closure: a verbatim top-level item of some unit, or a
/// synthesized `local = original` statement standing in for an aliased
/// in-index import (`from .m import act as A`).
struct DefinitionRef {
  std::string id; // "unit/path.py::name[,name...]"
  std::string unit_path;
  std::uint32_t item = 0;
  std::vector<std::string> names;
  bool synthesized = false;
  std::string alias_of; // synthesized only
  std::string text;     // synthesized only

  const std::string &sort_name() const { return names.front(); }
};

/// Which value an import statement gives a name; two imports binding one
/// name conflict only if their targets differ.
struct ImportBinding {
  std::string name;
  std::string target;
};

struct ImportRef {
  std::string text; // statement source text, without trailing newline
  std::string unit_path;
  syntax::ByteSpan span;
  std::vector<ImportBinding> bindings;
  bool future = false;
};

struct ClosureEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  EdgeKind kind = EdgeKind::LoadTime;
  std::string name;

  friend auto operator<=>(const ClosureEdge &, const ClosureEdge &) = default;
};

struct ClosureResult {
  std::string target; // qualname
  std::size_t target_index = 0;
  std::vector<DefinitionRef> definitions; // discovery order; target first
  std::vector<ImportRef> imports;         // unique by text, sorted by text
  std::set<std::string> unresolved;
  std::set<std::string> external;
  std::vector<ClosureEdge> edges;
  std::vector<std::string> warnings;

  std::set<std::string> definition_ids() const;
  std::set<std::string> import_texts() const;
};

/// Picks the candidate named by `target` (bare name, dotted qualname or
/// suffix, or "path::Name"). Throws TargetNotFound / AmbiguousTarget.
const scanner::BlockCandidate &select_target(const scanner::CorpusIndex &index,
                                             const std::string &target);

/// Computes closures over one read-only index, caching per-unit graphs.
/// Safe to share between threads.
class Resolver {
public:
  explicit Resolver(const scanner::CorpusIndex &index) : index_(index) {}

  const DependencyGraph &graph(const scanner::UnitRecord &unit);
  ClosureResult closure(const scanner::BlockCandidate &target);
  ClosureResult closure(const std::string &target);

  const scanner::CorpusIndex &index() const noexcept { return index_; }

private:
  const scanner::CorpusIndex &index_;
  std::mutex mutex_;
  std::map<std::string, std::unique_ptr<DependencyGraph>> graphs_;
};

ClosureResult closure(const scanner::CorpusIndex &index, const scanner::BlockCandidate &target);
ClosureResult closure(const scanner::CorpusIndex &index, const std::string &target);

/// JSON form used for closure catalog records.
nlohmann::json to_json(const ClosureResult &closure);

} // namespace scopeweaver::resolver
