#include <doctest.h>

#include <random>
#include <set>
#include <thread>

#include "scopeweaver/fileio.hpp"
#include "scopeweaver/specgate/specgate.hpp"
#include "support/support.hpp"

using namespace scopeweaver;
using namespace scopeweaver::specgate;
namespace fs = std::filesystem;

namespace {

const std::string kValid = R"(task: image-classification
dataset: cifar10
metric: accuracy
epochs: 10
model_ref: nnlib.models.resnet.ResNet
transform_ref: nnlib.transforms.standard
loss: cross_entropy
optimizer: sgd
hyperparameters:
  learning_rate: 0.1
  momentum: 0.9
  weight_decay: 0.0005
  batch_size: 128
)";

std::string with(const std::string &from, const std::string &to) {
  auto s = kValid;
  s.replace(s.find(from), from.size(), to);
  return s;
}

std::vector<fs::path> docs(const std::string &bucket) {
  std::vector<fs::path> out;
  for (const auto &e : fs::directory_iterator(swtest::fixtures() / "specs" / bucket))
    out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// "07_Missing_dataset.yaml" -> "Missing"
std::string rule_of(const fs::path &p) {
  const auto stem = p.stem().string();
  const auto a = stem.find('_') + 1;
  return stem.substr(a, stem.find('_', a) - a);
}

} // namespace

TEST_SUITE("specgate") {

TEST_CASE("fully valid spec passes and echoes the canonical form") {
  auto out = validate_spec(kValid);
  CHECK(out.status == Status::Pass);
  CHECK(out.fixes.empty());
  CHECK(out.diagnostics.empty());
  REQUIRE(out.canonical);
  CHECK((*out.canonical)["hyperparameters"]["batch_size"] == 128);
  CHECK(serialize(*out.canonical).back() == '\n');
}

TEST_CASE("string learning rate is coerced with a fix record") {
  auto out = validate_spec(with("learning_rate: 0.1", "learning_rate: \"0.01\""));
  CHECK(out.status == Status::Autofixed);
  REQUIRE(out.fixes.size() == 1);
  CHECK(out.fixes[0].path == "hyperparameters.learning_rate");
  CHECK(out.fixes[0].rule == "StringToNumber");
  CHECK(out.fixes[0].from == "0.01");
  CHECK(out.fixes[0].to == 0.01);
  CHECK((*out.canonical)["hyperparameters"]["learning_rate"] == 0.01);
}

TEST_CASE("momentum above range is rejected with a diagnostic") {
  auto out = validate_spec(with("momentum: 0.9", "momentum: 1.5"));
  CHECK(out.status == Status::Reject);
  REQUIRE(out.diagnostics.size() == 1);
  const auto &d = out.diagnostics[0];
  CHECK(d.path == "hyperparameters.momentum");
  CHECK(d.rule == "Range");
  CHECK(d.found == 1.5);
  CHECK(d.expected == "[0,1)");
  CHECK_FALSE(out.canonical);
  const auto j = out.to_json();
  CHECK(j["status"] == "reject");
  CHECK(j["diagnostics"][0]["expected"] == "[0,1)");
}

TEST_CASE("plain and quoted YAML scalars") {
  // Quoted numbers are strings (minor); plain YAML 1.2 numbers are numbers.
  CHECK(validate_spec(with("epochs: 10", "epochs: '10'")).status == Status::Autofixed);
  CHECK(validate_spec(with("weight_decay: 0.0005", "weight_decay: 5.0e-4")).status == Status::Pass);
  // YAML 1.1 style booleans stay strings in the core schema, so `yes` is a
  // valid task name rather than `true`.
  CHECK(validate_spec(with("task: image-classification", "task: yes")).status == Status::Pass);
  CHECK(validate_spec(with("task: image-classification", "task: true")).status == Status::Reject);
}

TEST_CASE("retry gate allows exactly one retry per lineage") {
  RetryGate gate;
  auto bad = validate_spec(with("momentum: 0.9", "momentum: 1.5"));
  CHECK(gate.check(bad, "L"));
  CHECK(bad.retry_allowed);
  auto again = bad;
  CHECK_FALSE(gate.check(again, "L"));
  CHECK_FALSE(again.retry_allowed);
  auto other = bad;
  CHECK(gate.check(other, "M"));
  auto good = validate_spec(kValid);
  CHECK_FALSE(gate.check(good, "N"));
  CHECK(gate.rejections("N") == 0);
  CHECK(gate.check(bad, "N"));
}

TEST_CASE("retry budget holds under random sequences and concurrency") {
  swtest::TempDir dir;
  RetryGate shared(dir / "retry.jsonl");
  const auto bad = validate_spec(with("momentum: 0.9", "momentum: 1.5"));
  std::vector<std::thread> workers;
  std::mutex m;
  std::map<std::string, int> allowed;
  for (int w = 0; w < 8; ++w)
    workers.emplace_back([&, w] {
      std::mt19937 rng(w);
      // Separate handles on one file behave like separate processes.
      RetryGate own(dir / "retry.jsonl");
      for (int i = 0; i < 200; ++i) {
        auto o = bad;
        const auto lineage = "L" + std::to_string(rng() % 20);
        if ((w % 2 ? own : shared).check(o, lineage)) {
          std::lock_guard lock(m);
          ++allowed[lineage];
        }
      }
    });
  for (auto &t : workers)
    t.join();
  for (const auto &[lineage, n] : allowed) {
    INFO(lineage);
    CHECK(n == 1);
  }
  CHECK(allowed.size() == 20);
}

TEST_CASE("sixty-document suite splits 20/20/20 with the named rules") {
  std::map<Status, int> tally;
  for (const char *bucket : {"valid", "minor", "major"}) {
    const auto files = docs(bucket);
    CHECK(files.size() == 20);
    for (const auto &f : files) {
      INFO(f.filename().string());
      auto out = validate_spec(read_file(f));
      ++tally[out.status];
      const std::string b = bucket;
      if (b == "valid") {
        CHECK(out.status == Status::Pass);
      } else if (b == "minor") {
        CHECK(out.status == Status::Autofixed);
        CHECK(out.diagnostics.empty());
        bool named = false;
        for (const auto &fx : out.fixes)
          named = named || fx.rule == rule_of(f);
        CHECK(named);
      } else {
        CHECK(out.status == Status::Reject);
        CHECK_FALSE(out.diagnostics.empty());
        bool named = false;
        for (const auto &d : out.diagnostics)
          named = named || d.rule == rule_of(f);
        CHECK(named);
      }
    }
  }
  CHECK(tally[Status::Pass] == 20);
  CHECK(tally[Status::Autofixed] == 20);
  CHECK(tally[Status::Reject] == 20);
}

TEST_CASE("canonical outputs are fixed points") {
  for (const char *bucket : {"valid", "minor"})
    for (const auto &f : docs(bucket)) {
      INFO(f.filename().string());
      auto out = validate_spec(read_file(f));
      REQUIRE(out.canonical);
      const auto text = serialize(*out.canonical);
      auto again = validate_spec(text);
      CHECK(again.status == Status::Pass);
      CHECK(again.fixes.empty());
      CHECK(serialize(*again.canonical) == text);
    }
}

TEST_CASE("status and diagnostics agree") {
  for (const char *bucket : {"valid", "minor", "major"})
    for (const auto &f : docs(bucket)) {
      auto out = validate_spec(read_file(f));
      if (out.status == Status::Pass)
        CHECK((out.diagnostics.empty() && out.fixes.empty()));
      if (out.status == Status::Reject)
        CHECK_FALSE(out.diagnostics.empty());
    }
}

TEST_CASE("garbage input never throws") {
  std::mt19937 rng(17);
  const std::string alphabet = "{}[]:,-\"' \n\tabc019.#&*!|>";
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    const int n = static_cast<int>(rng() % 80);
    for (int k = 0; k < n; ++k)
      s += alphabet[rng() % alphabet.size()];
    GateOutcome out;
    CHECK_NOTHROW(out = validate_spec(s));
    CHECK(out.status == Status::Reject);
  }
}

TEST_CASE("canonical outputs satisfy the published schema") {
  // The schema is checked by an independent validator when one is present.
  if (swtest::run("python3 -c 'import jsonschema' 2>/dev/null").status != 0) {
    MESSAGE("python3 jsonschema unavailable; skipped");
    return;
  }
  swtest::TempDir dir;
  int n = 0;
  for (const char *bucket : {"valid", "minor", "major"})
    for (const auto &f : docs(bucket)) {
      auto out = validate_spec(read_file(f));
      if (out.canonical)
        swtest::write(dir / ("ok" + std::to_string(n++) + ".json"), serialize(*out.canonical));
    }
  // Reject fixtures that are well-formed JSON must fail the schema too.
  int m = 0;
  for (const auto &f : docs("major"))
    if (f.extension() == ".json" && rule_of(f) != "DuplicateKey" && rule_of(f) != "NotStructured")
      swtest::write(dir / ("bad" + std::to_string(m++) + ".json"), read_file(f));
  const std::string script =
      "import json,sys,glob,jsonschema\n"
      "s=json.load(open(sys.argv[1]))\n"
      "v=jsonschema.Draft202012Validator(s)\n"
      "ok=sum(v.is_valid(json.load(open(p))) for p in glob.glob(sys.argv[2]+'/ok*.json'))\n"
      "bad=sum(not v.is_valid(json.load(open(p))) for p in glob.glob(sys.argv[2]+'/bad*.json'))\n"
      "print(ok, bad)\n";
  swtest::write(dir / "check.py", script);
  auto r = swtest::run("python3 " + swtest::quote((dir / "check.py").string()) + " " +
                       swtest::quote(std::string(SW_SCHEMA_DIR) + "/trainspec.v1.schema.json") + " " +
                       swtest::quote(dir.path().string()));
  CHECK(r.status == 0);
  CHECK(r.out == std::to_string(n) + " " + std::to_string(m) + "\n");
  CHECK(n == 40);
}

TEST_CASE("schema constants match the published schema") {
  auto schema = nlohmann::json::parse(read_file(fs::path(SW_SCHEMA_DIR) / "trainspec.v1.schema.json"));
  CHECK(schema["$id"] == kSchemaId);
  std::set<std::string> props;
  for (const auto &[k, _] : schema["properties"].items())
    props.insert(k);
  CHECK(props == std::set<std::string>(std::begin(kTopLevelKeys), std::end(kTopLevelKeys)));
  CHECK(schema["properties"]["optimizer"]["enum"].get<std::vector<std::string>>() ==
        std::vector<std::string>(std::begin(kOptimizers), std::end(kOptimizers)));
  CHECK(schema["properties"]["hyperparameters"]["required"].get<std::vector<std::string>>() ==
        std::vector<std::string>(std::begin(kHyperparameterKeys), std::end(kHyperparameterKeys)));
}

} // TEST_SUITE
