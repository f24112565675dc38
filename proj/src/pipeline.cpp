#include "scopeweaver/pipeline.hpp"

#include <map>

#include "scopeweaver/errors.hpp"
#include "scopeweaver/parallel.hpp"
#include "scopeweaver/validation/static_check.hpp"

using nlohmann::json;

namespace scopeweaver::pipeline {

std::vector<const scanner::BlockCandidate *> eligible_targets(const scanner::CorpusIndex &index) {
  std::vector<const scanner::BlockCandidate *> out;
  for (const auto &c : index.candidates)
    if (c.eligible())
      out.push_back(&c);
  return out;
}

std::vector<Extraction> extract(const scanner::CorpusIndex &index,
                                const std::vector<const scanner::BlockCandidate *> &targets,
                                const assembler::AssembleOptions &options, unsigned jobs) {
  std::vector<Extraction> out(targets.size());
  resolver::Resolver resolver(index);
  parallel_for(targets.size(), jobs, [&](std::size_t i) {
    auto &e = out[i];
    e.target = targets[i];
    e.stem = assembler::output_stem(*targets[i], index);
    try {
      e.closure = resolver.closure(*targets[i]);
      e.module = assembler::assemble(*e.closure, index, options);
    } catch (const Error &err) {
      e.error_class = err.error_class();
      e.error = err.what();
    }
  });
  return out;
}

void record(store::Catalog &catalog, store::BlobStore &blobs,
            const std::vector<Extraction> &results) {
  for (const auto &e : results) {
    if (e.closure) {
      auto j = resolver::to_json(*e.closure);
      j["unit"] = e.target->unit_path;
      catalog.append({"closure", j, std::nullopt});
    }
    json p = {{"target", e.target->qualname}, {"unit", e.target->unit_path}, {"stem", e.stem}};
    if (e.ok()) {
      blobs.put(e.module->source);
      p["status"] = "ok";
      catalog.append({"module", p, e.module->sha1});
    } else {
      p["status"] = "failed";
      p["error_class"] = e.error_class;
      p["error"] = e.error;
      catalog.append({"module", p, std::nullopt});
    }
  }
}

std::vector<ModuleEntry> latest_modules(store::Catalog &catalog) {
  std::map<std::pair<std::string, std::string>, ModuleEntry> latest;
  for (const auto &r : catalog.query("module")) {
    ModuleEntry m;
    try {
      m.target = r.payload.at("target");
      m.unit = r.payload.value("unit", "");
      m.ok = r.payload.at("status") == "ok";
      m.error_class = r.payload.value("error_class", "");
      m.error = r.payload.value("error", "");
    } catch (const json::exception &e) {
      throw StoreError(std::string("malformed module record: ") + e.what());
    }
    if (m.ok) {
      if (!r.sha1)
        throw StoreError("module record for " + m.target + " lacks sha1");
      m.sha1 = *r.sha1;
    }
    latest[{m.target, m.unit}] = std::move(m);
  }
  std::vector<ModuleEntry> out;
  for (auto &[_, m] : latest)
    out.push_back(std::move(m));
  return out;
}

validation::ValidationReport failed_extraction_report(const ModuleEntry &entry) {
  validation::ValidationReport r;
  r.qualname = entry.target;
  r.unit_path = entry.unit;
  r.stages.push_back({"assemble", false, "Other", entry.error_class + ": " + entry.error, 0});
  return r;
}

std::vector<validation::ValidationReport> validate(const std::vector<ModuleEntry> &modules,
                                                   store::BlobStore &blobs,
                                                   const ValidateOptions &options) {
  std::vector<validation::ValidationReport> out(modules.size());
  const unsigned jobs = options.jobs;
  parallel_for(modules.size(), jobs, [&](std::size_t i) {
    const auto &m = modules[i];
    if (!m.ok) {
      out[i] = failed_extraction_report(m);
      return;
    }
    const std::string source = blobs.get(m.sha1);
    out[i] = options.dynamic ? validation::validate_dynamic(m.target, source, options.sandbox)
                             : validation::validate_static(m.target, source);
    out[i].unit_path = m.unit;
  });
  return out;
}

void record(store::Catalog &catalog, const std::vector<validation::ValidationReport> &reports) {
  for (const auto &r : reports)
    catalog.append({"report", r.to_json(false),
                    r.module_sha1.empty() ? std::nullopt : std::optional(r.module_sha1)});
}

std::vector<validation::ValidationReport> stored_reports(store::Catalog &catalog) {
  std::vector<validation::ValidationReport> out;
  for (const auto &r : catalog.query("report"))
    out.push_back(validation::ValidationReport::from_json(r.payload));
  return out;
}

} // namespace scopeweaver::pipeline
