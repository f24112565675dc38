#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace scopeweaver::store {

/// Record kinds accepted by the catalog.
inline constexpr const char *kRecordKinds[] = {"unit",   "candidate", "closure",
                                               "module", "report",    "dedup"};

bool is_record_kind(const std::string &kind) noexcept;

struct CatalogRecord {
  std::string kind;
  nlohmann::json payload = nlohmann::json::object();
  std::optional<std::string> sha1;

  friend bool operator==(const CatalogRecord &, const CatalogRecord &) = default;
};

/// Canonical one-line form: sorted keys, no insignificant whitespace, LF.
std::string canonical_line(const CatalogRecord &record);

/// Inverse of canonical_line. Throws StoreError on malformed input.
CatalogRecord parse_record(std::string_view line);

/// Append-only JSONL catalog. One process appends; any number may read.
/// Readers only ever see complete lines.
class Catalog {
public:
  /// Opens (creating if needed) the catalog file.
  explicit Catalog(std::filesystem::path file);

  /// Appends and flushes to disk before returning. Returns the record id
  /// (0-based position in the catalog).
  std::size_t append(const CatalogRecord &record);

  /// Records of `kind` whose payload contains every key/value of `filter`.
  std::vector<CatalogRecord> query(const std::string &kind,
                                   const nlohmann::json &filter = nlohmann::json::object());

  std::vector<CatalogRecord> records();

  /// SHA-1 of the catalog bytes.
  std::string digest();

  const std::filesystem::path &file() const noexcept { return file_; }

private:
  void refresh_locked();

  std::filesystem::path file_;
  std::mutex mutex_;
  std::uint64_t offset_ = 0;
  std::string bytes_;
  std::vector<CatalogRecord> records_;
};

/// Writes a relational mirror of the catalog: one table per record kind
/// with columns (id, sha1, payload). Replaces `db_path` if it exists.
void export_sqlite(const std::vector<CatalogRecord> &records,
                   const std::filesystem::path &db_path);

} // namespace scopeweaver::store
