#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scopeweaver/assembler/assembler.hpp"
#include "scopeweaver/store/blob_store.hpp"
#include "scopeweaver/store/catalog.hpp"
#include "scopeweaver/validation/report.hpp"
#include "scopeweaver/validation/sandbox.hpp"

namespace scopeweaver::pipeline {

/// Result of extracting one target. `module` is empty when closure or
/// assembly failed; `error_class` then names the failure.
struct Extraction {
  const scanner::BlockCandidate *target = nullptr;
  std::optional<resolver::ClosureResult> closure;
  std::optional<assembler::AssembledModule> module;
  std::string stem;
  std::string error_class;
  std::string error;

  bool ok() const noexcept { return module.has_value(); }
};

/// Eligible candidates in index order.
std::vector<const scanner::BlockCandidate *> eligible_targets(const scanner::CorpusIndex &index);

/// Closure plus assembly for each target, in parallel; results keep the
/// order of `targets`.
std::vector<Extraction> extract(const scanner::CorpusIndex &index,
                                const std::vector<const scanner::BlockCandidate *> &targets,
                                const assembler::AssembleOptions &options, unsigned jobs = 0);

/// Appends closure and module records (and module blobs) for `results`.
void record(store::Catalog &catalog, store::BlobStore &blobs,
            const std::vector<Extraction> &results);

/// Stored module of one extraction, as found in the catalog.
struct ModuleEntry {
  std::string target;
  std::string unit;
  bool ok = false;
  std::string sha1;
  std::string error_class;
  std::string error;
};

/// Latest module record per (target, unit), sorted by (target, unit).
std::vector<ModuleEntry> latest_modules(store::Catalog &catalog);

/// Report for a target whose extraction failed: rejected at "assemble".
validation::ValidationReport failed_extraction_report(const ModuleEntry &entry);

struct ValidateOptions {
  bool dynamic = false;
  validation::SandboxConfig sandbox;
  unsigned jobs = 0;
};

/// Validates stored modules in parallel; reports keep the input order.
std::vector<validation::ValidationReport> validate(const std::vector<ModuleEntry> &modules,
                                                   store::BlobStore &blobs,
                                                   const ValidateOptions &options);

/// Appends one report record per report.
void record(store::Catalog &catalog, const std::vector<validation::ValidationReport> &reports);

/// Every report record in catalog order.
std::vector<validation::ValidationReport> stored_reports(store::Catalog &catalog);

} // namespace scopeweaver::pipeline
