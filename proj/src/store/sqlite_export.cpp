#include <sqlite3.h>

#include <filesystem>
#include <memory>

#include "scopeweaver/errors.hpp"
#include "scopeweaver/store/catalog.hpp"

namespace scopeweaver::store {
namespace {

struct DbCloser {
  void operator()(sqlite3 *db) const { sqlite3_close(db); }
};
struct StmtFinalizer {
  void operator()(sqlite3_stmt *s) const { sqlite3_finalize(s); }
};

void exec(sqlite3 *db, const std::string &sql) {
  char *err = nullptr;
  if (sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw StoreError("sqlite: " + msg);
  }
}

} // namespace

void export_sqlite(const std::vector<CatalogRecord> &records,
                   const std::filesystem::path &db_path) {
  std::error_code ec;
  std::filesystem::remove(db_path, ec);
  sqlite3 *raw = nullptr;
  if (sqlite3_open(db_path.c_str(), &raw) != SQLITE_OK) {
    std::string msg = raw ? sqlite3_errmsg(raw) : "open failed";
    sqlite3_close(raw);
    throw StoreError("sqlite: " + msg);
  }
  std::unique_ptr<sqlite3, DbCloser> db(raw);
  exec(db.get(), "BEGIN");
  for (const char *kind : kRecordKinds)
    exec(db.get(), std::string("CREATE TABLE ") + kind +
                       " (id INTEGER PRIMARY KEY, sha1 TEXT, payload TEXT NOT NULL)");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto &r = records[i];
    if (!is_record_kind(r.kind))
      throw StoreError("unknown record kind '" + r.kind + "'");
    const std::string sql = "INSERT INTO " + r.kind + " (id, sha1, payload) VALUES (?, ?, ?)";
    sqlite3_stmt *st = nullptr;
    if (sqlite3_prepare_v2(db.get(), sql.c_str(), -1, &st, nullptr) != SQLITE_OK)
      throw StoreError(std::string("sqlite: ") + sqlite3_errmsg(db.get()));
    std::unique_ptr<sqlite3_stmt, StmtFinalizer> stmt(st);
    const std::string payload =
        r.payload.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    sqlite3_bind_int64(st, 1, static_cast<sqlite3_int64>(i));
    if (r.sha1)
      sqlite3_bind_text(st, 2, r.sha1->c_str(), -1, SQLITE_TRANSIENT);
    else
      sqlite3_bind_null(st, 2);
    sqlite3_bind_text(st, 3, payload.c_str(), -1, SQLITE_TRANSIENT);
    if (sqlite3_step(st) != SQLITE_DONE)
      throw StoreError(std::string("sqlite: ") + sqlite3_errmsg(db.get()));
  }
  exec(db.get(), "COMMIT");
}

} // namespace scopeweaver::store
