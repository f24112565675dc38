#include <doctest.h>

#include <algorithm>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "scopeweaver/fileio.hpp"
#include "support/support.hpp"

using namespace scopeweaver;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Cli {
  int status;
  std::string out;
  std::string err;
};

Cli cli(const swtest::TempDir &dir, const std::string &args, const std::string &env = "") {
  const auto err = dir / "stderr.txt";
  auto r = swtest::run("cd " + swtest::quote(dir.path().string()) + " && " + env + " " +
                       swtest::quote(SW_CLI) + " " + args + " 2>" + swtest::quote(err.string()));
  return {r.status, r.out, fs::exists(err) ? read_file(err) : ""};
}

std::string corpus() { return swtest::quote(swtest::minicorpus().string()); }

void scan(const swtest::TempDir &dir) {
  REQUIRE(cli(dir, "scan " + corpus() + " --index idx").status == 0);
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("extract writes one module that matches the golden file") {
  swtest::TempDir dir;
  scan(dir);
  auto r = cli(dir, "--json extract MultiHeadAttention --index idx --out out");
  CHECK(r.status == 0);
  CHECK(r.err.empty());
  auto j = json::parse(r.out);
  CHECK(j["module"] == "out/MultiHeadAttention.py");
  std::vector<std::string> files;
  for (const auto &e : fs::directory_iterator(dir / "out"))
    files.push_back(e.path().filename().string());
  std::sort(files.begin(), files.end());
  CHECK(files == std::vector<std::string>{"MultiHeadAttention.provenance.json", "MultiHeadAttention.py"});
  CHECK(read_file(dir / "out/MultiHeadAttention.py") ==
        read_file(swtest::fixtures() / "golden/MultiHeadAttention.py"));
  CHECK(json::parse(read_file(dir / "out/MultiHeadAttention.provenance.json")) ==
        json::parse(read_file(swtest::fixtures() / "golden/MultiHeadAttention.provenance.json")));
}

TEST_CASE("unknown target exits 2 with a TargetNotFound diagnostic") {
  swtest::TempDir dir;
  scan(dir);
  auto r = cli(dir, "extract NoSuchName --index idx --out out");
  CHECK(r.status == 2);
  CHECK(r.out.empty());
  auto d = json::parse(r.err);
  CHECK(d["error_class"] == "TargetNotFound");
  CHECK(d["command"] == "extract");
}

TEST_CASE("exit codes for extraction failures") {
  swtest::TempDir dir;
  scan(dir);
  CHECK(cli(dir, "extract scale --index idx --out out").status == 2);
  CHECK(cli(dir, "extract DanglingHelper --index idx --out out").status == 6);
  CHECK(cli(dir, "extract DoubleScaler --index idx --out out").status == 7);
  CHECK(cli(dir, "extract CycleBlock --index idx --out out").status == 7);
  CHECK(cli(dir, "extract DanglingHelper --allow-unresolved --index idx --out out").status == 0);
  CHECK(cli(dir, "extract").status == 2);
  CHECK(cli(dir, "no-such-command").status == 2);
  CHECK(cli(dir, "extract X --index missing-dir --out out").status != 0);
}

TEST_CASE("report after validating the mini-corpus matches the hand count") {
  swtest::TempDir dir;
  scan(dir);
  CHECK(cli(dir, "extract --all --index idx --out out").status == 0);
  auto v = cli(dir, "--json validate --all --index idx");
  CHECK(v.status == 5); // four seeded failures are rejections
  CHECK(json::parse(v.out).size() == 54);
  auto r = cli(dir, "--json report --index idx --out report.json");
  REQUIRE(r.status == 0);
  auto j = json::parse(r.out);
  CHECK(j["total"] == 54);
  CHECK(j["admitted"] == 50);
  CHECK(j["rate"].get<double>() == doctest::Approx(50.0 / 54.0));
  CHECK(j["failures"].size() == 4);
  const auto file = read_file(dir / "report.json");
  CHECK(json::parse(file) == j);
  CHECK(file.back() == '\n');
}

TEST_CASE("validating loose files") {
  swtest::TempDir dir;
  swtest::write(dir / "good.py", "x = 1\n");
  swtest::write(dir / "bad.py", "def f(:\n");
  CHECK(cli(dir, "validate good.py").status == 0);
  auto r = cli(dir, "--json validate good.py bad.py");
  CHECK(r.status == 5);
  auto j = json::parse(r.out);
  CHECK(j[1]["rejected_stage"] == "parse");
  CHECK(j[1]["error_class"] == "SyntaxError");
}

TEST_CASE("no sandbox is launched without --dynamic") {
  swtest::TempDir dir;
  scan(dir);
  CHECK(cli(dir, "extract --all --index idx --out out").status == 0);
  const std::string env = "SCOPEWEAVER_SANDBOX_CMD='touch launched; " + std::string(SW_FAKE_SANDBOX) + "'";
  cli(dir, "validate --all --index idx", env);
  CHECK_FALSE(fs::exists(dir / "launched"));
  auto r = cli(dir, "--json validate --all --dynamic --timeout 10 --index idx", env);
  CHECK(fs::exists(dir / "launched"));
  auto j = json::parse(r.out);
  int three = 0;
  for (const auto &rep : j)
    three += rep["stages"].size() == 3;
  CHECK(three == 50);
}

TEST_CASE("dedupe flags the second copy") {
  swtest::TempDir dir;
  swtest::write(dir / "a.py", "def f(x):\n    return x + 1\n");
  swtest::write(dir / "b.py", "def f( x ):\n\n    return x+1  # same\n");
  swtest::write(dir / "c.py", "def f(x):\n    return x + 2\n");
  CHECK(cli(dir, "dedupe a.py --store d.jsonl").status == 0);
  auto r = cli(dir, "--json dedupe b.py --store d.jsonl");
  CHECK(r.status == 3);
  CHECK(r.out.find("a.py") != std::string::npos);
  CHECK(cli(dir, "dedupe c.py --store d.jsonl").status == 0);
}

TEST_CASE("concurrent dedupe processes admit exactly one") {
  swtest::TempDir dir;
  swtest::write(dir / "m.py", "x = 1\n");
  std::vector<std::thread> ts;
  std::vector<int> codes(16);
  for (int i = 0; i < 16; ++i)
    ts.emplace_back([&, i] {
      codes[i] = swtest::run("cd " + swtest::quote(dir.path().string()) + " && " +
                             swtest::quote(SW_CLI) + " dedupe m.py --store d.jsonl >/dev/null 2>&1")
                     .status;
    });
  for (auto &t : ts)
    t.join();
  CHECK(std::count(codes.begin(), codes.end(), 0) == 1);
  CHECK(std::count(codes.begin(), codes.end(), 3) == 15);
}

TEST_CASE("spec-check exit codes and retry bookkeeping") {
  swtest::TempDir dir;
  const auto specs = swtest::fixtures() / "specs";
  const auto valid = swtest::quote((specs / "valid/01_baseline.yaml").string());
  const auto minor = swtest::quote((specs / "minor/01_StringToNumber_lr.yaml").string());
  const auto major = swtest::quote((specs / "major/01_Range_momentum.yaml").string());
  CHECK(cli(dir, "spec-check " + valid).status == 0);
  auto m = cli(dir, "spec-check " + minor + " --json");
  CHECK(m.status == 0);
  CHECK(json::parse(m.out)["status"] == "autofixed");
  auto first = cli(dir, "--json spec-check " + major + " --lineage L --retry-store r.jsonl");
  CHECK(first.status == 4);
  CHECK(json::parse(first.out)["retry_allowed"] == true);
  auto second = cli(dir, "--json spec-check " + major + " --lineage L --retry-store r.jsonl");
  CHECK(second.status == 4);
  CHECK(json::parse(second.out)["retry_allowed"] == false);
}

TEST_CASE("every invocation appends a run manifest") {
  swtest::TempDir dir;
  scan(dir);
  cli(dir, "extract NoSuchName --index idx --out out");
  cli(dir, "report --index idx");
  std::vector<json> runs;
  std::istringstream in(read_file(dir / "idx/runs.jsonl"));
  for (std::string line; std::getline(in, line);)
    runs.push_back(json::parse(line));
  REQUIRE(runs.size() == 3);
  for (const auto &m : runs)
    for (const char *k : {"command", "arguments", "config_digest", "index_digest", "started_at",
                          "finished_at", "exit_status"})
      CHECK(m.contains(k));
  CHECK(runs[0]["command"] == "scan");
  CHECK(runs[1]["exit_status"] == 2);
  CHECK(runs[0]["config_digest"] == runs[2]["config_digest"]);
  // Nothing was appended to the catalog between these runs.
  CHECK(runs[1]["index_digest"] == runs[2]["index_digest"]);
  cli(dir, "--manifest elsewhere.jsonl report --index idx");
  CHECK(fs::exists(dir / "elsewhere.jsonl"));
  cli(dir, "dedupe idx/config.json --store st/d.jsonl");
  CHECK(fs::exists(dir / "st/runs.jsonl"));
}

TEST_CASE("json output on stdout only, for every command") {
  swtest::TempDir dir;
  std::vector<std::string> cmds = {"scan " + corpus() + " --index idx",
                                   "extract MultiHeadAttention --index idx --out out",
                                   "validate --all --index idx",
                                   "report --index idx",
                                   "dedupe out/MultiHeadAttention.py --store d.jsonl",
                                   "spec-check " + swtest::quote((swtest::fixtures() / "specs/valid/02_baseline.json").string()),
                                   "export-sqlite --index idx --out idx.sqlite"};
  for (const auto &c : cmds) {
    INFO(c);
    auto r = cli(dir, "--json " + c);
    CHECK(r.status == 0);
    CHECK_NOTHROW(json::parse(r.out));
    CHECK(r.err.empty());
  }
  CHECK(fs::exists(dir / "idx.sqlite"));
}

} // TEST_SUITE
