#include "scopeweaver/validation/sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <regex>

#include "scopeweaver/digest.hpp"
#include "scopeweaver/errors.hpp"
#include "scopeweaver/validation/static_check.hpp"

extern char **environ;

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace scopeweaver::validation {

std::set<std::string> default_allowlist() { return {"numpy", "torch", "torchvision"}; }

SandboxConfig SandboxConfig::from_environment() {
  SandboxConfig c;
  const char *env = std::getenv(kSandboxEnv);
  c.command = env && *env ? env : kDefaultSandboxCommand;
  return c;
}

SandboxResponse parse_response(const std::string &line, const std::string &expected_id) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception &e) {
    throw ProtocolError(std::string("sandbox response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("stages") ||
      !j["stages"].is_array())
    throw ProtocolError("sandbox response lacks id or stages");
  SandboxResponse r;
  r.id = j["id"];
  if (r.id != expected_id)
    throw ProtocolError("sandbox response id '" + r.id + "' does not match '" + expected_id + "'");
  if (j.contains("duration_ms") && j["duration_ms"].is_number())
    r.duration_ms = j["duration_ms"];
  static const char *order[] = {"compile", "import"};
  std::size_t k = 0;
  bool failed = false;
  for (const auto &s : j["stages"]) {
    if (!s.is_object() || !s.contains("name") || !s["name"].is_string() || !s.contains("ok") ||
        !s["ok"].is_boolean())
      throw ProtocolError("malformed sandbox stage");
    if (k >= 2 || s["name"] != order[k])
      throw ProtocolError("sandbox stages out of order");
    if (failed)
      throw ProtocolError("sandbox stage after a failed stage");
    StageResult st;
    st.name = s["name"];
    st.ok = s["ok"];
    if (!st.ok) {
      failed = true;
      const auto ec = s.value("error_class", json(nullptr));
      st.error_class = classify_error(ec.is_string() ? ec.get<std::string>() : "");
    }
    if (s.contains("message") && s["message"].is_string())
      st.message = s["message"];
    if (s.contains("duration_ms") && s["duration_ms"].is_number())
      st.duration_ms = s["duration_ms"];
    r.stages.push_back(std::move(st));
    ++k;
  }
  if (r.stages.empty() || (r.stages.size() == 1 && r.stages[0].ok))
    throw ProtocolError("sandbox response is missing stages");
  return r;
}

SandboxSession::SandboxSession(const std::string &command) {
  static std::once_flag ignore_pipe;
  std::call_once(ignore_pipe, [] { ::signal(SIGPIPE, SIG_IGN); });
  int in[2], out[2];
  if (::pipe2(in, O_CLOEXEC) != 0)
    throw IoError(std::string("pipe: ") + std::strerror(errno));
  if (::pipe2(out, O_CLOEXEC) != 0) {
    ::close(in[0]);
    ::close(in[1]);
    throw IoError(std::string("pipe: ") + std::strerror(errno));
  }
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_adddup2(&fa, in[0], 0);
  posix_spawn_file_actions_adddup2(&fa, out[1], 1);
  posix_spawn_file_actions_addopen(&fa, 2, "/dev/null", O_WRONLY, 0);
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);
  std::string sh = "/bin/sh", dash_c = "-c", cmd = command;
  char *argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
  pid_t pid = -1;
  const int rc = ::posix_spawn(&pid, "/bin/sh", &fa, &attr, argv, environ);
  posix_spawn_file_actions_destroy(&fa);
  posix_spawnattr_destroy(&attr);
  ::close(in[0]);
  ::close(out[1]);
  if (rc != 0) {
    ::close(in[1]);
    ::close(out[0]);
    throw IoError(std::string("cannot start sandbox: ") + std::strerror(rc));
  }
  pid_ = pid;
  in_fd_ = in[1];
  out_fd_ = out[0];
}

SandboxSession::~SandboxSession() { kill(); }

bool SandboxSession::send(const json &request) {
  if (in_fd_ < 0)
    return false;
  const std::string line = request.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
  std::size_t off = 0;
  while (off < line.size()) {
    const ssize_t n = ::write(in_fd_, line.data() + off, line.size() - off);
    if (n < 0) {
      if (errno == EINTR)
        continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

std::optional<std::string> SandboxSession::read_line(std::chrono::milliseconds budget) {
  const auto deadline = Clock::now() + budget;
  timed_out_ = false;
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (out_fd_ < 0)
      return std::nullopt;
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (left <= 0) {
      timed_out_ = true;
      return std::nullopt;
    }
    pollfd p{out_fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(std::min<long long>(left, 1 << 30)));
    if (rc < 0) {
      if (errno == EINTR)
        continue;
      throw IoError(std::string("poll: ") + std::strerror(errno));
    }
    if (rc == 0)
      continue;
    char buf[65536];
    const ssize_t n = ::read(out_fd_, buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR)
        continue;
      throw IoError(std::string("read: ") + std::strerror(errno));
    }
    if (n == 0) {
      ::close(out_fd_);
      out_fd_ = -1;
      if (!buffer_.empty()) {
        std::string line = std::move(buffer_);
        buffer_.clear();
        return line;
      }
      return std::nullopt;
    }
    buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

void SandboxSession::close_input() {
  if (in_fd_ >= 0) {
    ::close(in_fd_);
    in_fd_ = -1;
  }
}

void SandboxSession::kill() {
  close_input();
  if (out_fd_ >= 0) {
    ::close(out_fd_);
    out_fd_ = -1;
  }
  if (pid_ > 0) {
    ::kill(-pid_, SIGKILL);
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
    pid_ = -1;
  }
}

bool is_external_only(const StageResult &stage, const std::set<std::string> &allowlist) {
  if (stage.ok || stage.error_class != "ImportError")
    return false;
  static const std::regex missing(R"(No module named '([^']+)')");
  std::smatch m;
  if (!std::regex_search(stage.message, m, missing))
    return false;
  const std::string mod = m[1];
  return allowlist.count(mod.substr(0, mod.find('.'))) == 0;
}

ValidationReport validate_dynamic(const std::string &qualname, const std::string &source,
                                  const SandboxConfig &config) {
  ValidationReport r = validate_static(qualname, source);
  if (!r.stages.front().ok)
    return r;
  const std::string id = sha1_hex(source).substr(0, 16);
  const auto t0 = Clock::now();
  SandboxSession session(config.command);
  session.send({{"id", id}, {"module_source", source}, {"timeout_s", config.timeout_s}});
  session.close_input();
  const auto budget = std::chrono::milliseconds(static_cast<long long>(config.timeout_s * 1000));
  auto line = session.read_line(budget);
  const double elapsed =
      std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  if (!line) {
    const bool timeout = session.timed_out();
    session.kill();
    r.stages.push_back({"compile", true, {}, {}, 0});
    if (timeout)
      r.stages.push_back({"import", false, "Timeout",
                          "no response within " + std::to_string(config.timeout_s) + " s", elapsed});
    else
      r.stages.push_back({"import", false, "SandboxFailure", "sandbox exited without a response",
                          elapsed});
    return r;
  }
  session.kill();
  auto resp = parse_response(*line, id);
  for (auto &s : resp.stages) {
    if (is_external_only(s, config.allowlist))
      r.external_only = true;
    r.stages.push_back(std::move(s));
  }
  return r;
}

} // namespace scopeweaver::validation
