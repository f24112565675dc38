#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scopeweaver/store/catalog.hpp"
#include "scopeweaver/syntax/scope.hpp"
#include "scopeweaver/syntax/syntax_tree.hpp"

namespace scopeweaver::scanner {

enum class UnitStatus : std::uint8_t { Ok, Unparseable, Unreadable };

std::string_view to_string(UnitStatus s) noexcept;

struct UnitRecord {
  std::string path;   // "<root name>/<path relative to root>"
  std::string root;   // root name
  std::string module; // dotted import name relative to the root
  bool is_package = false;
  std::string sha1;
  std::string encoding = "utf-8";
  UnitStatus status = UnitStatus::Ok;
  std::string error_class;
  std::string error;
  std::vector<std::string> imports; // in-index unit paths this unit imports

  std::shared_ptr<const std::string> bytes;
  std::shared_ptr<const syntax::SyntaxTree> tree;
  std::shared_ptr<const syntax::ScopeTable> scopes;

  bool ok() const noexcept { return status == UnitStatus::Ok && tree && scopes; }
};

enum class CandidateKind : std::uint8_t { Class, Function };

struct BlockCandidate {
  std::string qualname;
  std::string name;
  std::string unit_path;
  std::string unit_sha1;
  syntax::ByteSpan span; // the definition statement, decorators included
  std::uint32_t item = 0;
  CandidateKind kind = CandidateKind::Class;
  std::vector<std::string> bases;
  bool has_forward = false;
  bool is_abstract = false;
  bool is_module = false; // subclasses a configured base (possibly transitively)
  std::string category;

  bool eligible() const noexcept {
    return kind == CandidateKind::Class && is_module && has_forward && !is_abstract;
  }
};

/// Where a module-level name of some unit ultimately comes from.
struct Export {
  enum class Kind : std::uint8_t {
    Definition,   // a top-level item of `unit`
    Import,       // an import statement the index cannot see through
    ExternalStar, // only `from <outside> import *` statements could bind it
    Missing,
  };
  Kind kind = Kind::Missing;
  const UnitRecord *unit = nullptr;
  std::uint32_t item = 0;
  const syntax::Node *statement = nullptr; // Import/ImportFrom for Kind::Import
  const syntax::Node *alias = nullptr;
  std::string name;                        // name as bound inside `unit`
  std::vector<const syntax::Node *> star_statements;
  bool in_index_module = false;            // imports a module that is itself indexed
  bool unresolved_relative = false;        // relative import escaping the roots
};

/// True when the item is a plain import statement (or `;`-joined imports).
bool is_import_item(const syntax::TopLevelItem &item) noexcept;

/// Content-addressed catalog of units and block candidates.
class CorpusIndex {
public:
  std::vector<UnitRecord> units;          // sorted by path
  std::vector<BlockCandidate> candidates; // sorted by (qualname, unit_path)
  std::vector<std::pair<std::string, std::string>> import_edges;

  /// Rebuilds lookup tables after units/candidates change.
  void reindex();

  const UnitRecord *unit(const std::string &path) const;
  /// In-index unit for an absolute module name, preferring `root`; a module
  /// found under several other roots is treated as absent.
  const UnitRecord *find_module(const std::string &module, const std::string &root) const;

  /// Candidates matching a bare name, dotted qualname (or dotted suffix of
  /// one), or "unit/path.py::Name".
  std::vector<const BlockCandidate *> find_targets(const std::string &target) const;
  const BlockCandidate *candidate(const std::string &unit_path, std::uint32_t item) const;

  /// Absolute module named by an ImportFrom, or nullopt when a relative
  /// import climbs above the root.
  std::optional<std::string> import_from_module(const UnitRecord &unit,
                                                const syntax::Node &import_from) const;

  /// Final binding of a module-level name as another module importing it
  /// would see it, following in-index re-exports.
  Export lookup(const UnitRecord &unit, const std::string &name) const;
  /// Resolves one import binding site (an Alias under Import/ImportFrom).
  Export resolve_import(const UnitRecord &unit, const syntax::BindingSite &site) const;
  /// Resolves a name only `from m import *` statements of `unit` could bind.
  Export resolve_star(const UnitRecord &unit, const std::string &name) const;

  /// Canonical catalog records for units and candidates.
  std::vector<store::CatalogRecord> records() const;
  /// SHA-1 over the canonical unit and candidate records.
  std::string digest() const;

private:
  Export lookup_depth(const UnitRecord &unit, const std::string &name, int depth) const;
  Export resolve_import_depth(const UnitRecord &unit, const syntax::BindingSite &site,
                              int depth) const;
  Export resolve_star_depth(const UnitRecord &unit, const std::string &name,
                            int depth) const;

  std::map<std::string, std::size_t> by_path_;
  std::map<std::pair<std::string, std::string>, std::size_t> by_module_; // (root, module)
  std::map<std::string, std::vector<std::size_t>> module_roots_;
};

/// Literal `__all__` of a unit, if it has one.
std::optional<std::vector<std::string>> literal_all(const UnitRecord &unit);

/// Writes `<dir>/blobs/*` and a fresh `<dir>/catalog.jsonl`.
void write_index(const CorpusIndex &index, const std::filesystem::path &dir);

/// Reads an index directory back, re-parsing every unit from its blob.
CorpusIndex load_index(const std::filesystem::path &dir);

} // namespace scopeweaver::scanner
