#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scopeweaver/dedup/dedup_store.hpp"
#include "scopeweaver/dedup/fingerprint.hpp"
#include "scopeweaver/digest.hpp"
#include "scopeweaver/errors.hpp"
#include "scopeweaver/fileio.hpp"
#include "scopeweaver/pipeline.hpp"
#include "scopeweaver/scanner/scanner.hpp"
#include "scopeweaver/specgate/specgate.hpp"
#include "scopeweaver/store/catalog.hpp"
#include "scopeweaver/validation/static_check.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
namespace sw = scopeweaver;

namespace {

enum Exit : int {
  kOk = 0,
  kGeneral = 1,
  kUsage = 2,
  kDuplicate = 3,
  kSpecReject = 4,
  kRejected = 5,
  kUnresolved = 6,
  kStructural = 7,
};

int exit_code_for(const std::string &error_class) {
  if (error_class == "TargetNotFound" || error_class == "AmbiguousTarget" ||
      error_class == "ConfigError")
    return kUsage;
  if (error_class == "UnresolvedNames")
    return kUnresolved;
  if (error_class == "NameCollision" || error_class == "CycleError")
    return kStructural;
  return kGeneral;
}

struct Globals {
  bool json = false;
  unsigned jobs = 0;
  std::string manifest;
};

struct RunContext {
  std::string command;
  std::vector<std::string> arguments;
  std::optional<fs::path> index;
  std::optional<fs::path> manifest_hint;
};

void diagnose(const std::string &command, const std::string &error_class,
              const std::string &message) {
  std::cerr << json{{"command", command}, {"error_class", error_class}, {"message", message}}.dump()
            << "\n";
}

std::string iso_now() { return sw::dedup::utc_timestamp(); }

std::string config_digest(const RunContext &ctx) {
  if (ctx.index && fs::exists(*ctx.index / "config.json"))
    return sw::scanner::ScanConfig::load(*ctx.index / "config.json").digest();
  return {};
}

std::string index_digest(const RunContext &ctx) {
  if (ctx.index && fs::exists(*ctx.index / "catalog.jsonl"))
    return sw::sha1_hex(sw::read_file(*ctx.index / "catalog.jsonl"));
  return {};
}

void write_manifest(const Globals &g, const RunContext &ctx, const std::string &started,
                    int status) {
  fs::path file;
  if (!g.manifest.empty())
    file = g.manifest;
  else if (ctx.index)
    file = *ctx.index / "runs.jsonl";
  else if (ctx.manifest_hint)
    file = *ctx.manifest_hint;
  else
    file = fs::path(".scopeweaver") / "runs.jsonl";
  const auto cfg = config_digest(ctx), idx = index_digest(ctx);
  json m = {{"command", ctx.command},
            {"arguments", ctx.arguments},
            {"config_digest", cfg.empty() ? json(nullptr) : json(cfg)},
            {"index_digest", idx.empty() ? json(nullptr) : json(idx)},
            {"started_at", started},
            {"finished_at", iso_now()},
            {"exit_status", status}};
  std::error_code ec;
  if (file.has_parent_path())
    fs::create_directories(file.parent_path(), ec);
  // Run manifests hold timestamps, so they live beside the catalog, not in it.
  std::FILE *f = std::fopen(file.c_str(), "ab");
  if (!f)
    return;
  const std::string line = m.dump() + "\n";
  std::fwrite(line.data(), 1, line.size(), f);
  std::fclose(f);
}

void emit(const Globals &g, const json &data, const std::string &human) {
  if (g.json)
    std::cout << data.dump() << "\n";
  else
    std::cout << human;
}

// ---- scan

struct ScanArgs {
  std::vector<std::string> roots;
  std::string index;
  std::string config;
};

int cmd_scan(const Globals &g, const ScanArgs &a) {
  const auto config = a.config.empty() ? sw::scanner::ScanConfig{}
                                       : sw::scanner::ScanConfig::load(a.config);
  std::vector<fs::path> roots(a.roots.begin(), a.roots.end());
  auto index = sw::scanner::scan(roots, config, g.jobs);
  sw::scanner::write_index(index, a.index);
  sw::write_file_atomic(fs::path(a.index) / "config.json", config.to_json().dump() + "\n");
  std::size_t eligible = 0, unparseable = 0, unreadable = 0;
  for (const auto &c : index.candidates)
    eligible += c.eligible();
  for (const auto &u : index.units) {
    unparseable += u.status == sw::scanner::UnitStatus::Unparseable;
    unreadable += u.status == sw::scanner::UnitStatus::Unreadable;
  }
  const json out = {{"units", index.units.size()},         {"candidates", index.candidates.size()},
                    {"eligible", eligible},                {"unparseable", unparseable},
                    {"unreadable", unreadable},            {"index_digest", index.digest()},
                    {"config_digest", config.digest()}};
  emit(g, out,
       "scanned " + std::to_string(index.units.size()) + " units, " +
           std::to_string(index.candidates.size()) + " candidates (" +
           std::to_string(eligible) + " eligible, " + std::to_string(unparseable) +
           " unparseable)\nindex " + index.digest() + "\n");
  return kOk;
}

// ---- extract

struct ExtractArgs {
  std::string target;
  bool all = false;
  std::string index;
  std::string out;
  bool allow_unresolved = false;
};

int cmd_extract(const Globals &g, const ExtractArgs &a) {
  if (a.target.empty() == !a.all)
    throw sw::ConfigError("give exactly one of TARGET or --all");
  auto index = sw::scanner::load_index(a.index);
  std::vector<const sw::scanner::BlockCandidate *> targets;
  if (a.all)
    targets = sw::pipeline::eligible_targets(index);
  else
    targets.push_back(&sw::resolver::select_target(index, a.target));

  sw::assembler::AssembleOptions opts;
  opts.allow_unresolved = a.allow_unresolved;
  opts.index_digest = index.digest();
  auto results = sw::pipeline::extract(index, targets, opts, g.jobs);

  sw::store::Catalog catalog(fs::path(a.index) / "catalog.jsonl");
  sw::store::BlobStore blobs(a.index);
  sw::pipeline::record(catalog, blobs, results);

  fs::create_directories(a.out);
  json items = json::array();
  std::string human;
  for (const auto &e : results) {
    json item = {{"target", e.target->qualname}, {"unit", e.target->unit_path}};
    if (e.ok()) {
      const auto file = fs::path(a.out) / (e.stem + ".py");
      const auto side = fs::path(a.out) / (e.stem + ".provenance.json");
      sw::write_file_atomic(file, e.module->source);
      sw::write_file_atomic(side, sw::assembler::provenance_json(*e.module, *e.closure).dump(2) +
                                      "\n");
      item["module"] = file.string();
      item["sha1"] = e.module->sha1;
      item["definitions"] = e.closure->definitions.size();
      item["imports"] = e.closure->imports.size();
      item["warnings"] = e.closure->warnings;
      human += e.target->qualname + " -> " + file.string() + "\n";
    } else {
      item["error_class"] = e.error_class;
      item["error"] = e.error;
      human += e.target->qualname + " FAILED " + e.error_class + ": " + e.error + "\n";
    }
    items.push_back(std::move(item));
  }
  if (!a.all && !results.front().ok()) {
    const auto &e = results.front();
    diagnose("extract", e.error_class, e.error);
    return exit_code_for(e.error_class);
  }
  emit(g, a.all ? items : items.front(), human);
  return kOk;
}

// ---- validate

struct ValidateArgs {
  std::vector<std::string> files;
  bool all = false;
  std::string index;
  bool dynamic = false;
  double timeout = sw::validation::kDefaultTimeoutSeconds;
};

std::string target_of(const std::string &source, const fs::path &file) {
  if (source.rfind(std::string(sw::syntax::kGeneratedMarker), 0) == 0) {
    const std::string key = "\n# target: ";
    if (auto p = source.find(key); p != std::string::npos) {
      const auto b = p + key.size();
      return source.substr(b, source.find('\n', b) - b);
    }
  }
  return file.stem().string();
}

int cmd_validate(const Globals &g, const ValidateArgs &a) {
  if (a.files.empty() == !a.all)
    throw sw::ConfigError("give module files or --all");
  if (a.all && a.index.empty())
    throw sw::ConfigError("--all needs --index");
  sw::pipeline::ValidateOptions opts;
  opts.dynamic = a.dynamic;
  opts.jobs = g.jobs;
  if (a.dynamic) {
    opts.sandbox = sw::validation::SandboxConfig::from_environment();
    opts.sandbox.timeout_s = a.timeout;
  }
  std::vector<sw::validation::ValidationReport> reports;
  if (a.all) {
    sw::store::Catalog catalog(fs::path(a.index) / "catalog.jsonl");
    sw::store::BlobStore blobs(a.index);
    reports = sw::pipeline::validate(sw::pipeline::latest_modules(catalog), blobs, opts);
    sw::pipeline::record(catalog, reports);
  } else {
    for (const auto &f : a.files) {
      const auto source = sw::read_file(f);
      const auto target = target_of(source, f);
      reports.push_back(a.dynamic ? sw::validation::validate_dynamic(target, source, opts.sandbox)
                                  : sw::validation::validate_static(target, source));
    }
    if (!a.index.empty()) {
      sw::store::Catalog catalog(fs::path(a.index) / "catalog.jsonl");
      sw::pipeline::record(catalog, reports);
    }
  }
  json arr = json::array();
  std::string human;
  std::size_t rejected = 0;
  for (const auto &r : reports) {
    arr.push_back(r.to_json(true));
    if (r.admitted()) {
      human += "admitted  " + r.qualname + "\n";
    } else {
      ++rejected;
      human += "rejected  " + r.qualname + "  [" + r.rejected_stage() + " " + r.error_class() + "]";
      for (const auto &s : r.stages)
        if (!s.ok && !s.message.empty())
          human += "  " + s.message;
      if (!r.unresolved.empty())
        human += "  unresolved: " + json(r.unresolved).dump();
      human += "\n";
    }
  }
  human += std::to_string(reports.size() - rejected) + "/" + std::to_string(reports.size()) +
           " admitted\n";
  emit(g, arr, human);
  return rejected ? kRejected : kOk;
}

// ---- report

struct ReportArgs {
  std::string index;
  std::string out;
};

int cmd_report(const Globals &g, const ReportArgs &a) {
  const fs::path file = fs::path(a.index) / "catalog.jsonl";
  if (!fs::exists(file))
    throw sw::StoreError("no index at " + a.index);
  sw::store::Catalog catalog(file);
  std::vector<sw::scanner::BlockCandidate> candidates;
  for (const auto &r : catalog.query("candidate")) {
    sw::scanner::BlockCandidate c;
    c.qualname = r.payload.at("qualname");
    c.unit_path = r.payload.at("unit");
    c.name = r.payload.at("name");
    c.category = r.payload.at("category");
    candidates.push_back(std::move(c));
  }
  const auto stats =
      sw::validation::executability_report(sw::pipeline::stored_reports(catalog), candidates);
  const std::string text = stats.serialize();
  if (!a.out.empty()) {
    sw::write_file_atomic(a.out, text);
    char rate[32];
    std::snprintf(rate, sizeof rate, "%.3f", stats.rate);
    emit(g, stats.to_json(),
         std::to_string(stats.admitted) + "/" + std::to_string(stats.total) + " admitted, rate " +
             rate + "\nwrote " + a.out + "\n");
  } else {
    std::cout << text;
  }
  return kOk;
}

// ---- dedupe

struct DedupeArgs {
  std::vector<std::string> files;
  std::string store;
  std::string index;
};

int cmd_dedupe(const Globals &g, const DedupeArgs &a) {
  sw::dedup::DedupStore store(a.store);
  std::optional<sw::store::Catalog> catalog;
  if (!a.index.empty())
    catalog.emplace(fs::path(a.index) / "catalog.jsonl");
  json arr = json::array();
  std::string human;
  bool duplicate = false;
  for (const auto &f : a.files) {
    const auto digest = sw::dedup::fingerprint(sw::read_file(f));
    const auto res = store.check_and_insert(digest, f);
    duplicate |= !res.is_new;
    json item = {{"file", f},
                 {"digest", digest},
                 {"status", res.is_new ? "new" : "duplicate"},
                 {"first_seen", res.record.to_json()["first_seen"]},
                 {"hit_count", res.record.hit_count}};
    if (catalog)
      catalog->append({"dedup", {{"digest", digest}, {"file", f}, {"new", res.is_new}},
                       std::nullopt});
    human += (res.is_new ? "new        " : "duplicate  ") + digest + "  " + f;
    if (!res.is_new)
      human += "  (first seen: " + res.record.first_seen.module + ")";
    human += "\n";
    arr.push_back(std::move(item));
  }
  emit(g, arr, human);
  return duplicate ? kDuplicate : kOk;
}

// ---- spec-check

struct SpecArgs {
  std::string file;
  std::string lineage;
  std::string retry_store;
};

int cmd_spec_check(const Globals &g, const SpecArgs &a) {
  auto outcome = sw::specgate::validate_spec(sw::read_file(a.file));
  if (outcome.status == sw::specgate::Status::Reject && !a.lineage.empty()) {
    std::optional<sw::specgate::RetryGate> gate;
    if (a.retry_store.empty())
      gate.emplace();
    else
      gate.emplace(a.retry_store);
    gate->check(outcome, a.lineage);
  }
  const auto j = outcome.to_json();
  std::string human = std::string(sw::specgate::to_string(outcome.status)) + "  " + a.file + "\n";
  for (const auto &f : outcome.fixes)
    human += "  fix  " + f.rule + "  " + f.path + "\n";
  for (const auto &d : outcome.diagnostics)
    human += "  " + d.rule + "  " + d.path + "  found " + d.found.dump() + ", expected " +
             d.expected + "\n";
  if (outcome.status == sw::specgate::Status::Reject && !a.lineage.empty())
    human += std::string("  retry ") + (outcome.retry_allowed ? "allowed" : "denied") + "\n";
  if (g.json)
    std::cout << j.dump() << "\n";
  else
    std::cout << human;
  return outcome.status == sw::specgate::Status::Reject ? kSpecReject : kOk;
}

// ---- export-sqlite

struct ExportArgs {
  std::string index;
  std::string out;
};

int cmd_export(const Globals &g, const ExportArgs &a) {
  const fs::path file = fs::path(a.index) / "catalog.jsonl";
  if (!fs::exists(file))
    throw sw::StoreError("no index at " + a.index);
  sw::store::Catalog catalog(file);
  const auto records = catalog.records();
  sw::store::export_sqlite(records, a.out);
  emit(g, {{"database", a.out}, {"records", records.size()}},
       "wrote " + std::to_string(records.size()) + " records to " + a.out + "\n");
  return kOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Extracts scope-closed modules from Python corpora and validates them."};
  app.require_subcommand(1);
  app.fallthrough(); // global flags may follow the subcommand
  Globals g;
  app.add_flag("--json", g.json, "Machine-readable output on stdout");
  app.add_option("--jobs,-j", g.jobs, "Worker threads (0 = one per CPU)");
  app.add_option("--manifest", g.manifest, "Run manifest file (JSONL, appended)");

  ScanArgs scan;
  auto *s = app.add_subcommand("scan", "Index corpus roots");
  s->add_option("roots", scan.roots, "Corpus root directories")->required();
  s->add_option("--index", scan.index, "Index directory")->required();
  s->add_option("--config", scan.config, "Scanner configuration (JSON)");

  ExtractArgs ex;
  auto *e = app.add_subcommand("extract", "Assemble scope-closed modules");
  e->add_option("target", ex.target, "Qualname, bare name, or unit.py::Name");
  e->add_flag("--all", ex.all, "Every eligible candidate");
  e->add_option("--index", ex.index, "Index directory")->required();
  e->add_option("--out", ex.out, "Output directory")->required();
  e->add_flag("--allow-unresolved", ex.allow_unresolved, "Emit modules with unresolved names");

  ValidateArgs va;
  auto *v = app.add_subcommand("validate", "Validate assembled modules");
  v->add_option("files", va.files, "Module files");
  v->add_flag("--all", va.all, "Every module recorded in the index");
  v->add_option("--index", va.index, "Index directory");
  v->add_flag("--dynamic", va.dynamic, "Run compile and import stages in the sandbox");
  v->add_option("--timeout", va.timeout, "Sandbox budget per module, seconds")
      ->check(CLI::PositiveNumber);

  ReportArgs rep;
  auto *r = app.add_subcommand("report", "Executability statistics");
  r->add_option("--index", rep.index, "Index directory")->required();
  r->add_option("--out", rep.out, "Report file");

  DedupeArgs dd;
  auto *d = app.add_subcommand("dedupe", "Fingerprint files against a dedup store");
  d->add_option("files", dd.files, "Source files")->required();
  d->add_option("--store", dd.store, "Dedup store (JSONL)")->required();
  d->add_option("--index", dd.index, "Also record sightings in this index");

  SpecArgs sp;
  auto *c = app.add_subcommand("spec-check", "Gate a training specification");
  c->add_option("file", sp.file, "YAML or JSON document")->required();
  c->add_option("--lineage", sp.lineage, "Lineage id for the retry budget");
  c->add_option("--retry-store", sp.retry_store, "Shared retry ledger (JSONL)");

  ExportArgs xa;
  auto *x = app.add_subcommand("export-sqlite", "Write a relational mirror of the catalog");
  x->add_option("--index", xa.index, "Index directory")->required();
  x->add_option("--out", xa.out, "SQLite database file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp &err) {
    return app.exit(err);
  } catch (const CLI::ParseError &err) {
    diagnose("", "UsageError", err.what());
    return kUsage;
  }

  RunContext ctx;
  ctx.command = app.get_subcommands().front()->get_name();
  for (int i = 1; i < argc; ++i)
    ctx.arguments.emplace_back(argv[i]);
  for (const std::string *idx : {&scan.index, &ex.index, &va.index, &rep.index, &dd.index,
                                 &xa.index})
    if (!idx->empty())
      ctx.index = *idx;
  if (!dd.store.empty())
    ctx.manifest_hint = fs::path(dd.store).parent_path() / "runs.jsonl";
  else if (!sp.retry_store.empty())
    ctx.manifest_hint = fs::path(sp.retry_store).parent_path() / "runs.jsonl";

  const std::string started = iso_now();
  int status = kOk;
  try {
    if (*s)
      status = cmd_scan(g, scan);
    else if (*e)
      status = cmd_extract(g, ex);
    else if (*v)
      status = cmd_validate(g, va);
    else if (*r)
      status = cmd_report(g, rep);
    else if (*d)
      status = cmd_dedupe(g, dd);
    else if (*c)
      status = cmd_spec_check(g, sp);
    else if (*x)
      status = cmd_export(g, xa);
  } catch (const sw::Error &err) {
    diagnose(ctx.command, err.error_class(), err.what());
    status = exit_code_for(err.error_class());
  } catch (const std::exception &err) {
    diagnose(ctx.command, "Error", err.what());
    status = kGeneral;
  }
  try {
    write_manifest(g, ctx, started, status);
  } catch (const std::exception &) {
  }
  return status;
}
