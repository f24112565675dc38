#include "scopeweaver/validation/report.hpp"

#include <algorithm>

#include "scopeweaver/errors.hpp"

using nlohmann::json;

namespace scopeweaver::validation {

std::string classify_error(const std::string &name) {
  for (const char *c : kErrorClasses)
    if (name == c)
      return name;
  if (name == "IndentationError" || name == "TabError" || name == "TokenizeError" ||
      name == "EncodingError")
    return "SyntaxError";
  if (name == "UnboundLocalError")
    return "NameError";
  if (name == "ModuleNotFoundError")
    return "ImportError";
  if (name == "TimeoutError")
    return "Timeout";
  return "Other";
}

bool ValidationReport::admitted() const {
  if (stages.empty() || !unresolved.empty() || !order_violations.empty())
    return false;
  return std::all_of(stages.begin(), stages.end(), [](const StageResult &s) { return s.ok; });
}

std::string ValidationReport::rejected_stage() const {
  for (const auto &s : stages)
    if (!s.ok)
      return s.name;
  if (stages.empty())
    return "parse";
  if (!unresolved.empty() || !order_violations.empty())
    return "parse";
  return {};
}

std::string ValidationReport::error_class() const {
  for (const auto &s : stages)
    if (!s.ok)
      return s.error_class;
  if (stages.empty())
    return "Other";
  if (!unresolved.empty() || !order_violations.empty())
    return "NameError";
  return {};
}

json ValidationReport::to_json(bool with_durations) const {
  json st = json::array();
  for (const auto &s : stages) {
    json j = {{"name", s.name},
              {"ok", s.ok},
              {"error_class", s.ok ? json(nullptr) : json(s.error_class)},
              {"message", s.message.empty() ? json(nullptr) : json(s.message)}};
    if (with_durations)
      j["duration_ms"] = s.duration_ms;
    st.push_back(std::move(j));
  }
  json j = {{"qualname", qualname},
            {"unit", unit_path},
            {"module_sha1", module_sha1},
            {"stages", st},
            {"unresolved", unresolved},
            {"order_violations", order_violations},
            {"external_only", external_only},
            {"verdict", admitted() ? "admitted" : "rejected"}};
  if (!admitted()) {
    j["rejected_stage"] = rejected_stage();
    j["error_class"] = error_class();
  }
  return j;
}

ValidationReport ValidationReport::from_json(const json &j) {
  ValidationReport r;
  try {
    r.qualname = j.at("qualname");
    r.unit_path = j.value("unit", "");
    r.module_sha1 = j.value("module_sha1", "");
    for (const auto &s : j.at("stages")) {
      StageResult st;
      st.name = s.at("name");
      st.ok = s.at("ok");
      if (s.contains("error_class") && s["error_class"].is_string())
        st.error_class = s["error_class"];
      if (s.contains("message") && s["message"].is_string())
        st.message = s["message"];
      st.duration_ms = s.value("duration_ms", 0.0);
      r.stages.push_back(std::move(st));
    }
    r.unresolved = j.value("unresolved", std::vector<std::string>{});
    r.order_violations = j.value("order_violations", std::vector<std::string>{});
    r.external_only = j.value("external_only", false);
  } catch (const json::exception &e) {
    throw StoreError(std::string("malformed report: ") + e.what());
  }
  return r;
}

json ExecutabilityStats::to_json() const {
  json cats = json::object();
  for (const auto &[cat, s] : per_category)
    cats[cat] = {{"total", s.total}, {"admitted", s.admitted}};
  json fails = json::array();
  for (const auto &f : failures)
    fails.push_back({{"qualname", f.qualname},
                     {"stage", f.stage},
                     {"error_class", f.error_class},
                     {"external_only", f.external_only}});
  return {{"total", total},
          {"admitted", admitted},
          {"rate", rate},
          {"per_category", cats},
          {"failures", fails},
          {"external_only", external_only},
          {"adjusted_rate", adjusted_rate}};
}

std::string ExecutabilityStats::serialize() const { return to_json().dump() + "\n"; }

ExecutabilityStats executability_report(const std::vector<ValidationReport> &reports,
                                        const std::vector<scanner::BlockCandidate> &candidates) {
  std::map<std::size_t, const ValidationReport *> latest;
  for (const auto &r : reports) {
    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < candidates.size(); ++i)
      if (candidates[i].qualname == r.qualname &&
          (r.unit_path.empty() || candidates[i].unit_path == r.unit_path))
        hits.push_back(i);
    if (hits.empty())
      throw JoinError("report for '" + r.qualname + "' matches no candidate");
    if (hits.size() > 1)
      throw JoinError("report for '" + r.qualname + "' matches " + std::to_string(hits.size()) +
                      " candidates");
    latest[hits.front()] = &r;
  }
  ExecutabilityStats s;
  for (const auto &[ci, r] : latest) {
    const auto &c = candidates[ci];
    auto &cat = s.per_category[c.category];
    ++s.total;
    ++cat.total;
    if (r->admitted()) {
      ++s.admitted;
      ++cat.admitted;
    } else {
      s.failures.push_back({c.qualname, r->rejected_stage(), r->error_class(), r->external_only});
      if (r->external_only)
        ++s.external_only;
    }
  }
  std::stable_sort(s.failures.begin(), s.failures.end(),
                   [](const FailureEntry &a, const FailureEntry &b) { return a.qualname < b.qualname; });
  s.rate = s.total ? static_cast<double>(s.admitted) / static_cast<double>(s.total) : 0.0;
  const std::size_t denom = s.total - s.external_only;
  s.adjusted_rate = denom ? static_cast<double>(s.admitted) / static_cast<double>(denom) : 0.0;
  return s;
}

} // namespace scopeweaver::validation
