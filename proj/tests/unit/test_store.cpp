#include <doctest.h>

#include <sqlite3.h>

#include <atomic>
#include <set>
#include <thread>

#include "scopeweaver/digest.hpp"
#include "scopeweaver/errors.hpp"
#include "scopeweaver/fileio.hpp"
#include "scopeweaver/store/blob_store.hpp"
#include "scopeweaver/store/catalog.hpp"
#include "support/support.hpp"

using namespace scopeweaver;
using namespace scopeweaver::store;
using nlohmann::json;

namespace {

// Independent digests from coreutils.
std::string coreutils(const char *tool, const std::filesystem::path &p) {
  auto r = swtest::run(std::string(tool) + " " + swtest::quote(p.string()));
  return r.out.substr(0, r.out.find(' '));
}

} // namespace

TEST_SUITE("store") {

TEST_CASE("digest constants") {
  CHECK(sha1_hex("") == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
  CHECK(sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
  CHECK(md5_hex("") == "d41d8cd98f00b204e9800998ecf8427e");
  CHECK(md5_hex("abc") == "900150983cd24fb0d6963f7d28e17f72");
}

TEST_CASE("empty blob key is the SHA-1 of nothing") {
  swtest::TempDir dir;
  BlobStore blobs(dir.path());
  CHECK(blobs.put("") == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
  CHECK(blobs.get("da39a3ee5e6b4b0d3255bfef95601890afd80709").empty());
}

TEST_CASE("same bytes twice store one copy") {
  swtest::TempDir dir;
  BlobStore blobs(dir.path());
  const auto a = blobs.put("hello\n");
  const auto b = blobs.put("hello\n");
  CHECK(a == b);
  CHECK(blobs.size() == 1);
  CHECK(blobs.contains(a));
  CHECK_THROWS_AS(blobs.get(std::string(40, '0')), StoreError);
}

TEST_CASE("blob keys match an independent SHA-1 and round trip") {
  swtest::TempDir dir;
  BlobStore blobs(dir.path());
  std::set<std::string> keys;
  for (const char *f : {"nnlib/layers/attention.py", "nnlib/layers/conv.py", "nnlib/models/vit.py"}) {
    const auto path = swtest::minicorpus() / f;
    const auto bytes = read_file(path);
    const auto key = blobs.put(bytes);
    CHECK(key == coreutils("sha1sum", path));
    CHECK(blobs.get(key) == bytes);
    CHECK(coreutils("sha1sum", blobs.dir() / key) == key);
    keys.insert(key);
  }
  CHECK(keys.size() == 3);
}

TEST_CASE("canonical lines sort keys and parse back") {
  CatalogRecord r{"unit", json{{"z", 1}, {"a", {{"y", 2}, {"b", 3}}}}, std::string("ab")};
  const auto line = canonical_line(r);
  CHECK(line.back() == '\n');
  CHECK(line.find("\"a\":{\"b\":3,\"y\":2}") != std::string::npos);
  CHECK(line.find("\"a\"") < line.find("\"z\""));
  CHECK(parse_record(line) == r);
  CHECK_THROWS_AS(parse_record("{not json"), StoreError);
  CHECK_THROWS_AS(parse_record(R"({"kind":"bogus","payload":{}})"), StoreError);
  CHECK(is_record_kind("dedup"));
  CHECK_FALSE(is_record_kind("bogus"));
}

TEST_CASE("append then query") {
  swtest::TempDir dir;
  Catalog cat(dir / "catalog.jsonl");
  CHECK(cat.query("unit").empty());
  CHECK(cat.records().empty());
  CHECK(cat.append({"unit", json{{"path", "a.py"}, {"root", "r"}}, std::nullopt}) == 0);
  CHECK(cat.append({"unit", json{{"path", "b.py"}, {"root", "r"}}, std::nullopt}) == 1);
  CHECK(cat.append({"candidate", json{{"qualname", "a.A"}}, std::nullopt}) == 2);
  CHECK(cat.query("unit").size() == 2);
  auto hit = cat.query("unit", json{{"path", "b.py"}});
  REQUIRE(hit.size() == 1);
  CHECK(hit[0].payload["path"] == "b.py");
  CHECK(cat.query("report").empty());
}

TEST_CASE("reopening keeps the digest, which is the SHA-1 of the file") {
  swtest::TempDir dir;
  std::string d1;
  {
    Catalog cat(dir / "catalog.jsonl");
    for (int i = 0; i < 10; ++i)
      cat.append({"module", json{{"i", i}}, sha1_hex(std::to_string(i))});
    d1 = cat.digest();
  }
  Catalog again(dir / "catalog.jsonl");
  CHECK(again.digest() == d1);
  CHECK(again.records().size() == 10);
  CHECK(coreutils("sha1sum", dir / "catalog.jsonl") == d1);
}

TEST_CASE("a second handle sees appends made through the first") {
  swtest::TempDir dir;
  Catalog writer(dir / "c.jsonl");
  Catalog reader(dir / "c.jsonl");
  writer.append({"unit", json{{"n", 1}}, std::nullopt});
  CHECK(reader.records().size() == 1);
  writer.append({"unit", json{{"n", 2}}, std::nullopt});
  CHECK(reader.records().size() == 2);
}

TEST_CASE("readers only observe complete records during appends") {
  swtest::TempDir dir;
  Catalog writer(dir / "c.jsonl");
  std::atomic<bool> done{false};
  std::atomic<std::size_t> max_seen{0};
  std::atomic<bool> bad{false};
  std::thread reader([&] {
    Catalog r(dir / "c.jsonl");
    while (!done) {
      try {
        const auto recs = r.records();
        for (std::size_t i = 0; i < recs.size(); ++i)
          if (recs[i].payload.value("n", -1) != static_cast<int>(i))
            bad = true;
        max_seen = recs.size();
      } catch (...) {
        bad = true;
      }
    }
  });
  const std::string pad(300, 'x');
  for (int i = 0; i < 300; ++i)
    writer.append({"unit", json{{"n", i}, {"pad", pad}}, std::nullopt});
  done = true;
  reader.join();
  CHECK_FALSE(bad.load());
  CHECK(writer.records().size() == 300);
}

TEST_CASE("sqlite export mirrors the catalog one table per kind") {
  swtest::TempDir dir;
  std::vector<CatalogRecord> recs = {
      {"unit", json{{"path", "a.py"}}, std::string("11")},
      {"unit", json{{"path", "b.py"}}, std::string("22")},
      {"candidate", json{{"qualname", "a.A"}}, std::nullopt},
  };
  const auto db = dir / "out.sqlite";
  export_sqlite(recs, db);
  export_sqlite(recs, db); // replaces rather than appending
  sqlite3 *h = nullptr;
  REQUIRE(sqlite3_open(db.c_str(), &h) == SQLITE_OK);
  auto count = [&](const char *sql) {
    sqlite3_stmt *st = nullptr;
    REQUIRE(sqlite3_prepare_v2(h, sql, -1, &st, nullptr) == SQLITE_OK);
    REQUIRE(sqlite3_step(st) == SQLITE_ROW);
    const int n = sqlite3_column_int(st, 0);
    sqlite3_finalize(st);
    return n;
  };
  CHECK(count("SELECT COUNT(*) FROM unit") == 2);
  CHECK(count("SELECT COUNT(*) FROM candidate") == 1);
  CHECK(count("SELECT COUNT(*) FROM unit WHERE sha1 = '22' AND json_extract(payload, '$.path') = 'b.py'") == 1);
  sqlite3_close(h);
}

} // TEST_SUITE
