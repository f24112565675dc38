#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace scopeweaver::dedup {

struct FirstSeen {
  std::string module;
  std::string timestamp; // UTC, RFC 3339
};

struct DedupRecord {
  std::string digest;
  FirstSeen first_seen;
  std::uint64_t hit_count = 0;

  nlohmann::json to_json() const;
  static DedupRecord from_json(const nlohmann::json &j);
};

struct InsertResult {
  bool is_new = false;
  DedupRecord record; // state after the call
};

/// Append-only JSONL store keyed by digest. Each line carries the full
/// state of one digest; the last line wins. Opening compacts the file to
/// one line per digest. Safe across threads and processes (flock).
class DedupStore {
public:
  explicit DedupStore(std::filesystem::path file);

  /// Atomically records a sighting: `new` for the first caller of a digest,
  /// otherwise the existing record with hit_count incremented. Throws
  /// StoreError when the file cannot be written.
  InsertResult check_and_insert(const std::string &digest, const std::string &module);

  std::vector<DedupRecord> records();
  const std::filesystem::path &file() const noexcept { return file_; }

private:
  void reload_locked(int fd);

  std::filesystem::path file_;
  std::mutex mutex_;
  std::map<std::string, DedupRecord> by_digest_;
  std::uint64_t offset_ = 0;
  std::uint64_t inode_ = 0;
};

std::string utc_timestamp();

} // namespace scopeweaver::dedup
