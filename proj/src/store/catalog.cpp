#include "scopeweaver/store/catalog.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>

#include "scopeweaver/digest.hpp"
#include "scopeweaver/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace scopeweaver::store {

bool is_record_kind(const std::string &kind) noexcept {
  return std::any_of(std::begin(kRecordKinds), std::end(kRecordKinds),
                     [&](const char *k) { return kind == k; });
}

std::string canonical_line(const CatalogRecord &record) {
  json j = json::object();
  j["kind"] = record.kind;
  j["payload"] = record.payload;
  if (record.sha1)
    j["sha1"] = *record.sha1;
  return j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}

CatalogRecord parse_record(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error &e) {
    throw StoreError(std::string("malformed catalog line: ") + e.what());
  }
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string() ||
      !j.contains("payload"))
    throw StoreError("catalog line lacks kind/payload");
  CatalogRecord r;
  r.kind = j["kind"].get<std::string>();
  if (!is_record_kind(r.kind))
    throw StoreError("unknown record kind '" + r.kind + "'");
  r.payload = j["payload"];
  if (j.contains("sha1") && j["sha1"].is_string())
    r.sha1 = j["sha1"].get<std::string>();
  return r;
}

namespace {

bool contains_all(const json &payload, const json &filter) {
  if (!filter.is_object())
    return true;
  if (!payload.is_object())
    return filter.empty();
  for (const auto &[key, value] : filter.items()) {
    auto it = payload.find(key);
    if (it == payload.end() || *it != value)
      return false;
  }
  return true;
}

} // namespace

Catalog::Catalog(fs::path file) : file_(std::move(file)) {
  std::error_code ec;
  if (file_.has_parent_path())
    fs::create_directories(file_.parent_path(), ec);
  const int fd = ::open(file_.c_str(), O_WRONLY | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0)
    throw StoreError("cannot open catalog " + file_.string() + ": " + std::strerror(errno));
  ::close(fd);
  std::lock_guard lock(mutex_);
  refresh_locked();
}

void Catalog::refresh_locked() {
  std::ifstream in(file_, std::ios::binary);
  if (!in)
    throw StoreError("cannot read catalog " + file_.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::uint64_t>(in.tellg());
  if (size < offset_)
    throw StoreError("catalog shrank underneath reader: " + file_.string());
  if (size == offset_)
    return;
  std::string chunk(size - offset_, '\0');
  in.seekg(static_cast<std::streamoff>(offset_));
  in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
  const auto last_nl = chunk.rfind('\n');
  if (last_nl == std::string::npos)
    return;
  chunk.resize(last_nl + 1);
  std::size_t pos = 0;
  while (pos < chunk.size()) {
    const auto nl = chunk.find('\n', pos);
    const std::string_view line(chunk.data() + pos, nl - pos);
    if (!line.empty())
      records_.push_back(parse_record(line));
    pos = nl + 1;
  }
  offset_ += chunk.size();
  bytes_ += chunk;
}

std::size_t Catalog::append(const CatalogRecord &record) {
  if (!is_record_kind(record.kind))
    throw StoreError("unknown record kind '" + record.kind + "'");
  const std::string line = canonical_line(record);
  std::lock_guard lock(mutex_);
  const int fd = ::open(file_.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
  if (fd < 0)
    throw StoreError("cannot append to " + file_.string() + ": " + std::strerror(errno));
  ::flock(fd, LOCK_EX);
  std::size_t done = 0;
  while (done < line.size()) {
    const auto n = ::write(fd, line.data() + done, line.size() - done);
    if (n < 0 && errno == EINTR)
      continue;
    if (n < 0) {
      const std::string err = std::strerror(errno);
      ::flock(fd, LOCK_UN);
      ::close(fd);
      throw StoreError("append failed: " + err);
    }
    done += static_cast<std::size_t>(n);
  }
  ::fdatasync(fd);
  ::flock(fd, LOCK_UN);
  ::close(fd);
  refresh_locked();
  return records_.size() - 1;
}

std::vector<CatalogRecord> Catalog::query(const std::string &kind, const json &filter) {
  std::lock_guard lock(mutex_);
  refresh_locked();
  std::vector<CatalogRecord> out;
  for (const auto &r : records_)
    if (r.kind == kind && contains_all(r.payload, filter))
      out.push_back(r);
  return out;
}

std::vector<CatalogRecord> Catalog::records() {
  std::lock_guard lock(mutex_);
  refresh_locked();
  return records_;
}

std::string Catalog::digest() {
  std::lock_guard lock(mutex_);
  refresh_locked();
  return sha1_hex(bytes_);
}

} // namespace scopeweaver::store
