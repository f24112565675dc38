#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "scopeweaver/scanner/config.hpp"
#include "scopeweaver/scanner/corpus_index.hpp"

namespace scopeweaver::scanner {

/// Parses one file into a unit record. Never throws for bad content; the
/// status and error fields describe the failure.
UnitRecord load_unit(std::string path, std::string root, std::string module, bool is_package,
                     std::string bytes);

/// Walks `roots` and builds an index. Unreadable files are recorded with
/// status Unreadable. `jobs` = 0 means one worker per hardware thread.
CorpusIndex scan(const std::vector<std::filesystem::path> &roots, const ScanConfig &config,
                 unsigned jobs = 0);

/// Discovers candidates and computes eligibility over already-loaded units.
void discover_candidates(CorpusIndex &index, const ScanConfig &config);

/// Category label for a candidate under `config`'s rules.
std::string classify_category(const BlockCandidate &candidate, const ScanConfig &config);

} // namespace scopeweaver::scanner
