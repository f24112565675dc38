#pragma once

#include <chrono>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "scopeweaver/validation/report.hpp"

namespace scopeweaver::validation {

inline constexpr const char *kSandboxEnv = "SCOPEWEAVER_SANDBOX_CMD";
inline constexpr const char *kDefaultSandboxCommand = "scopeweaver-sandbox";
inline constexpr double kDefaultTimeoutSeconds = 30.0;

/// Packages the dynamic stage expects to be importable. An ImportError for
/// any other top-level package marks the failure as external-only.
std::set<std::string> default_allowlist();

struct SandboxConfig {
  std::string command; // run through /bin/sh -c
  double timeout_s = kDefaultTimeoutSeconds;
  std::set<std::string> allowlist = default_allowlist();

  /// Command from the environment override, else the default name.
  static SandboxConfig from_environment();
};

struct SandboxResponse {
  std::string id;
  std::vector<StageResult> stages;
  double duration_ms = 0;
};

/// Parses and checks one response line. Throws ProtocolError.
SandboxResponse parse_response(const std::string &line, const std::string &expected_id);

/// One sandbox child speaking newline-delimited JSON on stdin/stdout.
class SandboxSession {
public:
  explicit SandboxSession(const std::string &command);
  ~SandboxSession();
  SandboxSession(const SandboxSession &) = delete;
  SandboxSession &operator=(const SandboxSession &) = delete;

  /// Writes one request line. Returns false if the child is gone.
  bool send(const nlohmann::json &request);
  /// Next response line, or nullopt on EOF. Throws Timeout-free; callers
  /// check `timed_out()` after a nullopt.
  std::optional<std::string> read_line(std::chrono::milliseconds budget);
  bool timed_out() const noexcept { return timed_out_; }
  /// Closes the child's stdin (it should then exit).
  void close_input();
  /// Kills the child's process group and reaps it.
  void kill();

private:
  int pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  bool timed_out_ = false;
  std::string buffer_;
};

/// Compile and import stages for one module, one child process per call.
/// A missed deadline yields an import stage failed with "Timeout"; a child
/// that dies without answering yields "SandboxFailure". Throws
/// ProtocolError on a malformed response.
ValidationReport validate_dynamic(const std::string &qualname, const std::string &source,
                                  const SandboxConfig &config);

/// Tags an import failure caused by a package outside the allowlist.
bool is_external_only(const StageResult &stage, const std::set<std::string> &allowlist);

} // namespace scopeweaver::validation
