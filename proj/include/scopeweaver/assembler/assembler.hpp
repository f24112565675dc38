#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "scopeweaver/resolver/closure.hpp"

namespace scopeweaver::assembler {

struct ProvenanceEntry {
  std::string identity;
  std::string kind; // "import" | "definition" | "alias"
  std::string unit;
  syntax::ByteSpan origin;  // span in the origin unit
  syntax::ByteSpan emitted; // span in the assembled source
};

struct AssembledModule {
  std::string target;
  std::string index_digest;
  std::string source;
  std::string sha1;
  std::vector<std::string> import_header;
  std::vector<ProvenanceEntry> provenance;
};

struct AssembleOptions {
  bool allow_unresolved = false;
  std::string index_digest;
};

/// Definition indices of `closure` in emission order: every load-time,
/// annotation, and rebinding dependency first. Among the orders that allow,
/// the one closest to a dependencies-first walk from the target (deferred
/// references included, neighbours by name) wins, so helpers usually precede
/// their users and the target comes last. Throws CycleError naming the
/// members of any load-time cycle.
std::vector<std::size_t> topo_order(const resolver::ClosureResult &closure);

/// Comment block written at the top of every assembled module.
std::string preamble(const std::string &target, const std::string &index_digest);

/// Emits the module: preamble, sorted unique import statements (future
/// imports first), a blank line, then definitions verbatim in topo order.
/// Throws UnresolvedNames (unless allowed), NameCollision, CycleError.
AssembledModule assemble(const resolver::ClosureResult &closure,
                         const scanner::CorpusIndex &index,
                         const AssembleOptions &options = {});

/// Throws NameCollision when two closure members from different origins
/// bind the same top-level name.
void check_collisions(const resolver::ClosureResult &closure);

/// Sidecar document describing where every emitted statement came from.
nlohmann::json provenance_json(const AssembledModule &module,
                               const resolver::ClosureResult &closure);

/// Output file stem for a target: the bare name, or the qualname when the
/// bare name is shared by several candidates.
std::string output_stem(const scanner::BlockCandidate &target,
                        const scanner::CorpusIndex &index);

} // namespace scopeweaver::assembler
