#include <doctest.h>

#include <chrono>
#include <cstdlib>

#include "scopeweaver/digest.hpp"
#include "scopeweaver/errors.hpp"
#include "scopeweaver/validation/sandbox.hpp"
#include "support/support.hpp"

using namespace scopeweaver;
using namespace scopeweaver::validation;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

SandboxConfig fake(double timeout_s = 5) {
  SandboxConfig c;
  c.command = swtest::quote(SW_FAKE_SANDBOX);
  c.timeout_s = timeout_s;
  return c;
}

json request(const std::string &id, const std::string &src) {
  return {{"id", id}, {"module_source", src}, {"timeout_s", 5}};
}

} // namespace

TEST_SUITE("sandbox") {

TEST_CASE("clean module passes compile and import") {
  auto r = validate_dynamic("m", "x = 1\n", fake());
  REQUIRE(r.stages.size() == 3);
  CHECK(r.stages[0].name == "parse");
  CHECK(r.stages[1].name == "compile");
  CHECK(r.stages[1].ok);
  CHECK(r.stages[2].name == "import");
  CHECK(r.stages[2].ok);
  CHECK(r.admitted());
}

TEST_CASE("compile failure has no import stage") {
  SandboxSession s(fake().command);
  REQUIRE(s.send(request("1", "def f(:")));
  auto line = s.read_line(5s);
  REQUIRE(line);
  auto resp = parse_response(*line, "1");
  REQUIRE(resp.stages.size() == 1);
  CHECK(resp.stages[0].name == "compile");
  CHECK_FALSE(resp.stages[0].ok);
  CHECK(resp.stages[0].error_class == "SyntaxError");
}

TEST_CASE("top-level undefined name fails the import stage") {
  auto r = validate_dynamic("m", "y = undefined_name\n", fake());
  REQUIRE(r.stages.size() == 3);
  CHECK(r.stages[1].ok);
  CHECK_FALSE(r.stages[2].ok);
  CHECK(r.stages[2].error_class == "NameError");
  CHECK(r.rejected_stage() == "import");
}

TEST_CASE("a hung module times out and the child is killed") {
  const std::string marker = "swtest-hang-" + std::to_string(::getpid());
  SandboxConfig c = fake(2);
  // Through a shell that stays the parent, so only a group kill reaches it.
  c.command = "exec 3>/dev/null; " + swtest::quote(SW_FAKE_SANDBOX) + " " + marker + "; true";
  const auto t0 = std::chrono::steady_clock::now();
  auto r = validate_dynamic("m", "while True:\n    pass\n", c);
  const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  REQUIRE(r.stages.size() == 3);
  CHECK_FALSE(r.stages[2].ok);
  CHECK(r.stages[2].error_class == "Timeout");
  CHECK(secs >= 1.95);
  CHECK(secs < 4.0);
  // "[s]" keeps the pattern from matching the shell running pgrep.
  CHECK(swtest::run("pgrep -f '[s]" + marker.substr(1) + "'").status == 1);
}

TEST_CASE("a child that dies without answering is a sandbox failure") {
  auto r = validate_dynamic("m", "CRASH = 1\n", fake());
  REQUIRE(r.stages.size() == 3);
  CHECK(r.stages[2].error_class == "SandboxFailure");
  CHECK_FALSE(r.admitted());
}

TEST_CASE("malformed responses are protocol errors") {
  CHECK_THROWS_AS(validate_dynamic("m", "GARBAGE = 1\n", fake()), ProtocolError);
  CHECK_THROWS_AS(validate_dynamic("m", "WRONGID = 1\n", fake()), ProtocolError);
  const auto ok = json{{"name", "compile"}, {"ok", true}, {"error_class", nullptr}, {"message", nullptr}};
  const auto imp = json{{"name", "import"}, {"ok", true}, {"error_class", nullptr}, {"message", nullptr}};
  auto bad_compile = ok;
  bad_compile["ok"] = false;
  bad_compile["error_class"] = "SyntaxError";
  CHECK_THROWS_AS(parse_response(json{{"id", "a"}, {"stages", {imp, ok}}}.dump(), "a"), ProtocolError);
  CHECK_THROWS_AS(parse_response(json{{"id", "a"}, {"stages", {bad_compile, imp}}}.dump(), "a"),
                  ProtocolError);
  CHECK_THROWS_AS(parse_response(json{{"id", "a"}, {"stages", {ok}}}.dump(), "a"), ProtocolError);
  CHECK_THROWS_AS(parse_response(json{{"id", "a"}, {"stages", json::array()}}.dump(), "a"), ProtocolError);
  CHECK_THROWS_AS(parse_response(json{{"id", "b"}, {"stages", {ok, imp}}}.dump(), "a"), ProtocolError);
  CHECK(parse_response(json{{"id", "a"}, {"stages", {ok, imp}}}.dump(), "a").stages.size() == 2);
}

TEST_CASE("one response per request, ids paired, in a streaming session") {
  SandboxSession s(fake().command);
  for (int i = 0; i < 5; ++i)
    REQUIRE(s.send(request("r" + std::to_string(i), "x = " + std::to_string(i))));
  for (int i = 0; i < 5; ++i) {
    auto line = s.read_line(5s);
    REQUIRE(line);
    CHECK(parse_response(*line, "r" + std::to_string(i)).id == "r" + std::to_string(i));
  }
  s.close_input();
  CHECK_FALSE(s.read_line(5s));
  CHECK_FALSE(s.timed_out());
}

TEST_CASE("import failures outside the allowlist are tagged external") {
  auto r = validate_dynamic("m", "import nonexistent\n", fake());
  REQUIRE(r.stages.size() == 3);
  CHECK(r.stages[2].error_class == "ImportError");
  CHECK(r.external_only);
  const auto allow = default_allowlist();
  CHECK(allow == std::set<std::string>{"numpy", "torch", "torchvision"});
  StageResult st{"import", false, "ImportError", "No module named 'torch.fancy'", 0};
  CHECK_FALSE(is_external_only(st, allow));
  st.message = "No module named 'timm.layers'";
  CHECK(is_external_only(st, allow));
  st.error_class = "NameError";
  CHECK_FALSE(is_external_only(st, allow));
}

TEST_CASE("static parse failures never reach the sandbox") {
  SandboxConfig c;
  c.command = "exit 9"; // would be a SandboxFailure if launched
  auto r = validate_dynamic("m", "def f(:\n", c);
  REQUIRE(r.stages.size() == 1);
  CHECK(r.stages[0].error_class == "SyntaxError");
}

TEST_CASE("environment override of the launch command") {
  ::setenv(kSandboxEnv, "my-runner --flag", 1);
  CHECK(SandboxConfig::from_environment().command == "my-runner --flag");
  ::unsetenv(kSandboxEnv);
  CHECK(SandboxConfig::from_environment().command == kDefaultSandboxCommand);
  CHECK(SandboxConfig{}.timeout_s == 30.0);
}

TEST_CASE("identical module bytes give identical verdicts") {
  for (const char *src : {"x = 1\n", "y = undefined_name\n", "import nonexistent\n"}) {
    auto a = validate_dynamic("m", src, fake());
    auto b = validate_dynamic("m", src, fake());
    CHECK(a.to_json() == b.to_json());
  }
}

} // TEST_SUITE
