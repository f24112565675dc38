#include "scopeweaver/dedup/dedup_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <regex>

#include "scopeweaver/errors.hpp"
#include "scopeweaver/fileio.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace scopeweaver::dedup {

json DedupRecord::to_json() const {
  return {{"digest", digest},
          {"first_seen", {{"module", first_seen.module}, {"timestamp", first_seen.timestamp}}},
          {"hit_count", hit_count}};
}

DedupRecord DedupRecord::from_json(const json &j) {
  static const std::regex hex32("[0-9a-f]{32}");
  DedupRecord r;
  try {
    r.digest = j.at("digest");
    r.first_seen.module = j.at("first_seen").at("module");
    r.first_seen.timestamp = j.at("first_seen").at("timestamp");
    r.hit_count = j.at("hit_count");
  } catch (const json::exception &e) {
    throw StoreError(std::string("malformed dedup record: ") + e.what());
  }
  if (!std::regex_match(r.digest, hex32))
    throw StoreError("malformed dedup digest '" + r.digest + "'");
  return r;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  ::gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

std::string line_of(const DedupRecord &r) { return r.to_json().dump() + "\n"; }

class FileLock {
public:
  FileLock(const fs::path &path, int flags) {
    fd_ = ::open(path.c_str(), flags | O_CLOEXEC, 0644);
    if (fd_ < 0)
      throw StoreError("cannot open dedup store " + path.string() + ": " + std::strerror(errno));
    while (::flock(fd_, LOCK_EX) != 0)
      if (errno != EINTR)
        throw StoreError("cannot lock dedup store: " + std::string(std::strerror(errno)));
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  int fd() const noexcept { return fd_; }

private:
  int fd_ = -1;
};

std::uint64_t inode_of(int fd) {
  struct stat st {};
  if (::fstat(fd, &st) != 0)
    throw StoreError("cannot stat dedup store");
  return static_cast<std::uint64_t>(st.st_ino);
}

void write_all(int fd, const std::string &s) {
  std::size_t done = 0;
  while (done < s.size()) {
    const auto n = ::write(fd, s.data() + done, s.size() - done);
    if (n < 0 && errno == EINTR)
      continue;
    if (n < 0)
      throw StoreError("dedup store write failed: " + std::string(std::strerror(errno)));
    done += static_cast<std::size_t>(n);
  }
}

} // namespace

DedupStore::DedupStore(fs::path file) : file_(std::move(file)) {
  std::error_code ec;
  if (file_.has_parent_path())
    fs::create_directories(file_.parent_path(), ec);
  std::lock_guard guard(mutex_);
  // The lock lives on a sidecar so that compaction can replace the data file.
  FileLock lock(fs::path(file_.string() + ".lock"), O_WRONLY | O_CREAT);
  const int fd = ::open(file_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0)
    throw StoreError("cannot open dedup store " + file_.string() + ": " + std::strerror(errno));
  try {
    reload_locked(fd);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  std::string compacted;
  for (const auto &[_, r] : by_digest_)
    compacted += line_of(r);
  try {
    write_file_atomic(file_, compacted);
  } catch (const IoError &e) {
    throw StoreError(e.what());
  }
  offset_ = compacted.size();
  const int nfd = ::open(file_.c_str(), O_RDONLY | O_CLOEXEC);
  if (nfd < 0)
    throw StoreError("cannot reopen dedup store " + file_.string());
  inode_ = inode_of(nfd);
  ::close(nfd);
}

void DedupStore::reload_locked(int fd) {
  const auto ino = inode_of(fd);
  if (ino != inode_) {
    by_digest_.clear();
    offset_ = 0;
    inode_ = ino;
  }
  struct stat st {};
  ::fstat(fd, &st);
  const auto size = static_cast<std::uint64_t>(st.st_size);
  if (size <= offset_)
    return;
  std::string chunk(size - offset_, '\0');
  std::size_t got = 0;
  while (got < chunk.size()) {
    const auto n = ::pread(fd, chunk.data() + got, chunk.size() - got,
                           static_cast<off_t>(offset_ + got));
    if (n < 0 && errno == EINTR)
      continue;
    if (n <= 0)
      throw StoreError("cannot read dedup store " + file_.string());
    got += static_cast<std::size_t>(n);
  }
  const auto last = chunk.rfind('\n');
  if (last == std::string::npos)
    return;
  chunk.resize(last + 1);
  std::size_t pos = 0;
  while (pos < chunk.size()) {
    const auto nl = chunk.find('\n', pos);
    const std::string_view line(chunk.data() + pos, nl - pos);
    pos = nl + 1;
    if (line.empty())
      continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error &e) {
      throw StoreError(std::string("malformed dedup store line: ") + e.what());
    }
    auto r = DedupRecord::from_json(j);
    by_digest_[r.digest] = std::move(r);
  }
  offset_ += chunk.size();
}

InsertResult DedupStore::check_and_insert(const std::string &digest, const std::string &module) {
  std::lock_guard guard(mutex_);
  FileLock lock(fs::path(file_.string() + ".lock"), O_WRONLY | O_CREAT);
  const int fd = ::open(file_.c_str(), O_RDWR | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0)
    throw StoreError("cannot open dedup store " + file_.string() + ": " + std::strerror(errno));
  InsertResult out;
  try {
    reload_locked(fd);
    auto it = by_digest_.find(digest);
    if (it == by_digest_.end()) {
      DedupRecord r{digest, {module, utc_timestamp()}, 0};
      out.is_new = true;
      out.record = r;
    } else {
      out.record = it->second;
      ++out.record.hit_count;
    }
    const std::string line = line_of(out.record);
    write_all(fd, line);
    ::fdatasync(fd);
    by_digest_[digest] = out.record;
    offset_ += line.size();
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  return out;
}

std::vector<DedupRecord> DedupStore::records() {
  std::lock_guard guard(mutex_);
  FileLock lock(fs::path(file_.string() + ".lock"), O_WRONLY | O_CREAT);
  const int fd = ::open(file_.c_str(), O_RDONLY | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0)
    throw StoreError("cannot open dedup store " + file_.string());
  try {
    reload_locked(fd);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  std::vector<DedupRecord> out;
  for (const auto &[_, r] : by_digest_)
    out.push_back(r);
  return out;
}

} // namespace scopeweaver::dedup
