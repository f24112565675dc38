#include <doctest.h>

#include "scopeweaver/assembler/assembler.hpp"
#include "scopeweaver/digest.hpp"
#include "scopeweaver/pipeline.hpp"
#include "scopeweaver/validation/static_check.hpp"
#include "support/oracles.hpp"

using namespace scopeweaver;
using namespace scopeweaver::assembler;
using resolver::ClosureResult;
using scanner::CorpusIndex;

namespace {

const CorpusIndex &corpus() {
  static const CorpusIndex index = scanner::scan({swtest::minicorpus()}, scanner::ScanConfig{});
  return index;
}

CorpusIndex scan_files(swtest::TempDir &dir, const std::map<std::string, std::string> &files) {
  for (const auto &[n, t] : files)
    swtest::write(dir / ("pkg/" + n), t);
  return scanner::scan({dir / "pkg"}, scanner::ScanConfig{});
}

std::vector<std::string> ordered_names(const ClosureResult &c) {
  std::vector<std::string> out;
  for (auto i : topo_order(c))
    out.push_back(c.definitions[i].names.front());
  return out;
}

std::string body(const std::string &source) {
  // Everything after the generated comment block.
  std::size_t at = 0;
  while (at < source.size() && source[at] == '#')
    at = source.find('\n', at) + 1;
  return source.substr(at);
}

std::vector<pipeline::Extraction> extract_all() {
  AssembleOptions opt;
  opt.index_digest = corpus().digest();
  return pipeline::extract(corpus(), pipeline::eligible_targets(corpus()), opt);
}

} // namespace

TEST_SUITE("assembler") {

TEST_CASE("single definition orders to itself") {
  swtest::TempDir dir;
  auto idx = scan_files(dir, {{"m.py", "class A:\n    def forward(self, x):\n        return x\n"}});
  CHECK(ordered_names(resolver::closure(idx, "A")) == std::vector<std::string>{"A"});
}

TEST_CASE("base chain orders dependencies first") {
  swtest::TempDir dir;
  auto idx = scan_files(dir, {{"m.py", "class A(B):\n    def forward(self, x):\n        return x\n"
                                       "class B(C):\n    pass\nclass C:\n    pass\n"}});
  CHECK(ordered_names(resolver::closure(idx, "A")) == std::vector<std::string>{"C", "B", "A"});
}

TEST_CASE("mutual recursion through bodies assembles deterministically") {
  swtest::TempDir dir;
  auto idx = scan_files(dir, {{"m.py", "def f(n):\n    return g(n - 1) if n else 0\n"
                                       "def g(n):\n    return f(n - 1) if n else 1\n"
                                       "class R:\n    def forward(self, x):\n        return f(x)\n"}});
  auto c = resolver::closure(idx, "R");
  auto order = ordered_names(c);
  CHECK(order.size() == 3);
  CHECK(order.back() == "R");
  CHECK(ordered_names(resolver::closure(idx, "R")) == order);
  auto m = assemble(c, idx);
  CHECK(validation::load_time_order_violations(syntax::parse_source("m.py", m.source),
                                               syntax::build_scopes(syntax::parse_source("m.py", m.source)))
            .empty());
}

TEST_CASE("load-time cycles are refused with their members named") {
  swtest::TempDir dir;
  auto idx = scan_files(dir, {{"m.py", "class A(B):\n    def forward(self, x):\n        return x\n"
                                       "class B(A):\n    pass\n"}});
  auto c = resolver::closure(idx, "A");
  try {
    topo_order(c);
    FAIL("expected CycleError");
  } catch (const CycleError &e) {
    CHECK(std::string(e.what()).find("pkg/m.py::A") != std::string::npos);
    CHECK(std::string(e.what()).find("pkg/m.py::B") != std::string::npos);
  }
}

TEST_CASE("one import and one definition") {
  swtest::TempDir dir;
  const std::string a = "class A(nn.Module):\n    def forward(self, x):\n        return x\n";
  auto idx = scan_files(dir, {{"m.py", "import torch.nn as nn\n" + a}});
  auto m = assemble(resolver::closure(idx, "A"), idx, {false, "d1"});
  CHECK(m.source == preamble(m.target, "d1") + "import torch.nn as nn\n\n" + a);
  CHECK(m.import_header == std::vector<std::string>{"import torch.nn as nn"});
  CHECK(m.sha1 == sha1_hex(m.source));
  CHECK(preamble(m.target, "d1").rfind(syntax::kGeneratedMarker, 0) == 0);
}

TEST_CASE("golden module for a three-definition closure") {
  auto c = resolver::closure(corpus(), "MultiHeadAttention");
  REQUIRE(c.definitions.size() == 3);
  auto m = assemble(c, corpus(), {false, corpus().digest()});
  CHECK(m.source == read_file(swtest::fixtures() / "golden/MultiHeadAttention.py"));
  auto golden_prov =
      nlohmann::json::parse(read_file(swtest::fixtures() / "golden/MultiHeadAttention.provenance.json"));
  CHECK(provenance_json(m, c) == golden_prov);
}

TEST_CASE("a helper defined in two files is a collision naming both") {
  try {
    assemble(resolver::closure(corpus(), "DoubleScaler"), corpus());
    FAIL("expected NameCollision");
  } catch (const NameCollision &e) {
    const std::string msg = e.what();
    CHECK(msg.find("collide_a.py") != std::string::npos);
    CHECK(msg.find("collide_b.py") != std::string::npos);
  }
}

TEST_CASE("unresolved closures need the explicit flag") {
  auto c = resolver::closure(corpus(), "DanglingHelper");
  CHECK_FALSE(c.unresolved.empty());
  CHECK_THROWS_AS(assemble(c, corpus()), UnresolvedNames);
  AssembleOptions opt;
  opt.allow_unresolved = true;
  CHECK_NOTHROW(assemble(c, corpus(), opt));
}

TEST_CASE("assembled modules keep the structural invariants") {
  std::size_t assembled = 0;
  for (const auto &x : extract_all()) {
    if (!x.ok())
      continue;
    ++assembled;
    const auto &m = *x.module;
    INFO(m.target);
    auto tree = syntax::parse_source("m.py", m.source);
    auto scopes = syntax::build_scopes(tree);
    CHECK(validation::load_time_order_violations(tree, scopes).empty());
    CHECK(validation::unresolved_names(tree, scopes).empty());
    CHECK(m.sha1 == sha1_hex(m.source));

    std::uint32_t last_import = 0, first_def = UINT32_MAX;
    for (const auto &p : m.provenance) {
      if (p.kind == "import")
        last_import = std::max(last_import, p.emitted.end);
      else
        first_def = std::min(first_def, p.emitted.begin);
      if (p.kind == "definition") {
        // Verbatim: emitted bytes are the origin bytes.
        const auto *unit = corpus().unit(p.unit);
        REQUIRE(unit);
        CHECK(m.source.substr(p.emitted.begin, p.emitted.size()) ==
              std::string(unit->tree->text(p.origin)));
      }
    }
    CHECK(last_import <= first_def);
    for (const auto &item : tree.top_level) {
      const auto s = item.statement_span();
      bool covered = false;
      for (const auto &p : m.provenance)
        covered = covered || (p.emitted.begin <= s.begin && s.end <= p.emitted.end);
      CHECK(covered);
    }
  }
  CHECK(assembled == 50);
}

TEST_CASE("re-assembling an assembled module is a fixed point") {
  swtest::TempDir dir;
  std::vector<std::pair<std::string, std::string>> done; // (path target, body)
  for (const auto &x : extract_all()) {
    if (!x.ok())
      continue;
    swtest::write(dir / ("asm/" + x.stem + ".py"), x.module->source);
    done.emplace_back("asm/" + x.stem + ".py::" + x.target->name, body(x.module->source));
  }
  auto again = scanner::scan({dir / "asm"}, scanner::ScanConfig{});
  for (const auto &[target, text] : done) {
    INFO(target);
    auto m = assemble(resolver::closure(again, target), again);
    CHECK(body(m.source) == text);
  }
}

TEST_CASE("identical closure and index give identical bytes") {
  auto a = assemble(resolver::closure(corpus(), "VisionTransformer"), corpus(), {false, "x"});
  auto b = assemble(resolver::closure(corpus(), "VisionTransformer"), corpus(), {false, "x"});
  CHECK(a.sha1 == b.sha1);
  CHECK(a.source == b.source);
}

TEST_CASE("the minimality check flags a superfluous member") {
  swtest::TempDir dir;
  auto idx = scan_files(dir, {{"m.py", "import os\nimport sys\n\ndef used():\n    return os.sep\n\n"
                                       "class K:\n    def forward(self, x):\n        return used()\n"}});
  auto c = resolver::closure(idx, "K");
  auto m = assemble(c, idx);
  CHECK(swtest::minimality_violations(m, c).empty());
  // Splice in an unused import and definition by hand.
  auto padded = m;
  const std::string extra_imp = "import sys\n";
  const std::string extra_def = "\n\ndef unused():\n    return sys.path\n";
  const auto at = padded.source.find("import os\n") + 10;
  padded.source.insert(at, extra_imp);
  for (auto &p : padded.provenance)
    if (p.emitted.begin >= at) {
      p.emitted.begin += extra_imp.size();
      p.emitted.end += extra_imp.size();
    }
  padded.provenance.push_back({"import sys", "import", "pkg/m.py", {},
                               {static_cast<std::uint32_t>(at),
                                static_cast<std::uint32_t>(at + extra_imp.size())}});
  const auto def_at = static_cast<std::uint32_t>(padded.source.size());
  padded.source += extra_def;
  padded.provenance.push_back({"pkg/m.py::unused", "definition", "pkg/m.py", {},
                               {def_at, static_cast<std::uint32_t>(padded.source.size())}});
  auto v = swtest::minimality_violations(padded, c);
  // Dropping `unused` frees nothing else; dropping `import sys` leaves
  // `unused` broken, so only the definition is reported.
  CHECK(v == std::vector<std::string>{"pkg/m.py::unused"});
}

TEST_CASE("the minimality check keeps bindings that only look redundant") {
  swtest::TempDir dir;
  // `_CACHE = None` is needed even though get_cache assigns it via `global`;
  // `import torch.nn as nn` is needed even though a star import might
  // provide `nn`.
  auto idx = scan_files(dir, {{"m.py", "import torch.nn as nn\nfrom torch.nn.functional import *\n\n"
                                       "_CACHE = None\n\n\ndef get_cache():\n    global _CACHE\n"
                                       "    if _CACHE is None:\n        _CACHE = {}\n    return _CACHE\n\n\n"
                                       "class K(nn.Module):\n    def forward(self, x):\n"
                                       "        return relu(x) + len(get_cache())\n"}});
  auto c = resolver::closure(idx, "K");
  auto m = assemble(c, idx);
  CHECK(m.provenance.size() == 5);
  CHECK(swtest::minimality_violations(m, c).empty());
  // A second, direct binding of `_CACHE` makes the first one removable.
  auto padded = m;
  const std::string extra = "_CACHE = None\n";
  padded.source += extra;
  const auto at = static_cast<std::uint32_t>(padded.source.size() - extra.size());
  padded.provenance.push_back({"pkg/m.py::_CACHE#2", "definition", "pkg/m.py", {},
                               {at, static_cast<std::uint32_t>(padded.source.size())}});
  CHECK(swtest::minimality_violations(padded, c).size() == 2);
}

TEST_CASE("output stems disambiguate shared names") {
  const auto &a = resolver::select_target(corpus(), "MultiHeadAttention");
  CHECK(output_stem(a, corpus()) == "MultiHeadAttention");
}

} // TEST_SUITE
