#pragma once

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>

#include "scopeweaver/fileio.hpp"

namespace swtest {

namespace fs = std::filesystem;

inline fs::path fixtures() { return fs::path(SW_FIXTURES_DIR); }
inline fs::path minicorpus() { return fixtures() / "minicorpus"; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("swtest-" + std::to_string(::getpid()) + "-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;
  const fs::path &path() const { return path_; }
  fs::path operator/(const std::string &p) const { return path_ / p; }

private:
  fs::path path_;
};

inline void write(const fs::path &p, const std::string &text) {
  fs::create_directories(p.parent_path());
  scopeweaver::write_file_atomic(p, text);
}

struct RunResult {
  int status = -1;
  std::string out;
};

/// Runs a shell command, capturing stdout. stderr goes to `err_file` if set.
inline RunResult run(const std::string &cmd) {
  RunResult r;
  std::FILE *p = ::popen(cmd.c_str(), "r");
  if (!p)
    return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0)
    r.out.append(buf, n);
  const int st = ::pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

inline std::string quote(const std::string &s) {
  std::string q = "'";
  for (char c : s)
    q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

} // namespace swtest
