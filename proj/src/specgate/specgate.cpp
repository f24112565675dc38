#include "scopeweaver/specgate/specgate.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <regex>
#include <set>

#include <yaml-cpp/yaml.h>

#include "scopeweaver/errors.hpp"

namespace scopeweaver::specgate {

std::string_view to_string(Status s) noexcept {
  switch (s) {
  case Status::Pass:
    return "pass";
  case Status::Autofixed:
    return "autofixed";
  case Status::Reject:
    return "reject";
  }
  return "?";
}

ojson GateOutcome::to_json() const {
  ojson fx = ojson::array();
  for (const auto &f : fixes)
    fx.push_back({{"path", f.path}, {"rule", f.rule}, {"from", f.from}, {"to", f.to}});
  ojson dg = ojson::array();
  for (const auto &d : diagnostics)
    dg.push_back({{"path", d.path}, {"rule", d.rule}, {"found", d.found}, {"expected", d.expected}});
  ojson j;
  j["status"] = std::string(specgate::to_string(status));
  j["fixes"] = fx;
  j["diagnostics"] = dg;
  j["retry_allowed"] = retry_allowed;
  j["canonical"] = canonical ? *canonical : ojson(nullptr);
  return j;
}

std::string serialize(const ojson &canonical) { return canonical.dump() + "\n"; }

namespace {

const std::regex kIntRe(R"([-+]?[0-9]+)");
const std::regex kFloatRe(R"([-+]?(\.[0-9]+|[0-9]+(\.[0-9]*)?)([eE][-+]?[0-9]+)?)");

std::optional<ojson> number_from(const std::string &raw) {
  std::string s = raw;
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  if (b == std::string::npos)
    return std::nullopt;
  s = s.substr(b, e - b + 1);
  if (std::regex_match(s, kIntRe)) {
    try {
      return ojson(std::stoll(s));
    } catch (const std::out_of_range &) {
      return std::nullopt;
    }
  }
  if (std::regex_match(s, kFloatRe)) {
    const double d = std::strtod(s.c_str(), nullptr);
    if (std::isfinite(d))
      return ojson(d);
  }
  return std::nullopt;
}

struct Parsed {
  ojson doc;
  std::vector<Diagnostic> duplicates;
  std::string error;
};

ojson from_yaml(const YAML::Node &n, const std::string &path, std::vector<Diagnostic> &dups) {
  switch (n.Type()) {
  case YAML::NodeType::Null:
  case YAML::NodeType::Undefined:
    return nullptr;
  case YAML::NodeType::Scalar: {
    const std::string &s = n.Scalar();
    if (n.Tag() == "!")
      return s;
    if (s == "~" || s == "null" || s == "Null" || s == "NULL" || s.empty())
      return nullptr;
    if (s == "true" || s == "True" || s == "TRUE")
      return true;
    if (s == "false" || s == "False" || s == "FALSE")
      return false;
    if (auto num = number_from(s); num && s.find_first_of(" \t") == std::string::npos)
      return *num;
    return s;
  }
  case YAML::NodeType::Sequence: {
    ojson a = ojson::array();
    std::size_t i = 0;
    for (const auto &c : n)
      a.push_back(from_yaml(c, path + "[" + std::to_string(i++) + "]", dups));
    return a;
  }
  case YAML::NodeType::Map: {
    ojson o = ojson::object();
    for (const auto &kv : n) {
      const std::string key = kv.first.Scalar();
      const std::string p = path.empty() ? key : path + "." + key;
      if (o.contains(key)) {
        dups.push_back({p, "DuplicateKey", nullptr, "unique key"});
        continue;
      }
      o[key] = from_yaml(kv.second, p, dups);
    }
    return o;
  }
  }
  return nullptr;
}

Parsed parse_document(std::string_view text) {
  Parsed out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && (text[first] == '{' || text[first] == '[')) {
    std::vector<std::set<std::string>> keys;
    std::vector<std::string> path;
    std::vector<bool> is_object;
    std::string pending;
    auto cb = [&](int, ojson::parse_event_t ev, ojson &parsed) {
      using E = ojson::parse_event_t;
      switch (ev) {
      case E::object_start:
        path.push_back(pending);
        keys.emplace_back();
        is_object.push_back(true);
        break;
      case E::array_start:
        path.push_back(pending);
        is_object.push_back(false);
        break;
      case E::object_end:
        keys.pop_back();
        path.pop_back();
        is_object.pop_back();
        break;
      case E::array_end:
        path.pop_back();
        is_object.pop_back();
        break;
      case E::key: {
        const std::string k = parsed.get<std::string>();
        const std::string &base = path.back();
        pending = base.empty() ? k : base + "." + k;
        if (!keys.back().insert(k).second) {
          out.duplicates.push_back({pending, "DuplicateKey", nullptr, "unique key"});
          return false;
        }
        break;
      }
      case E::value:
        break;
      }
      return true;
    };
    try {
      out.doc = ojson::parse(text.begin(), text.end(), cb);
    } catch (const ojson::exception &e) {
      out.error = e.what();
    }
    return out;
  }
  try {
    const YAML::Node root = YAML::Load(std::string(text));
    out.doc = from_yaml(root, "", out.duplicates);
  } catch (const YAML::Exception &e) {
    out.error = e.what();
  }
  return out;
}

const std::map<std::string, std::string> kTopAliases = {
    {"model", "model_ref"},          {"transform", "transform_ref"},
    {"transforms", "transform_ref"}, {"optim", "optimizer"},
    {"epoch", "epochs"},             {"num_epochs", "epochs"},
    {"hparams", "hyperparameters"},  {"hyperparams", "hyperparameters"},
};
const std::map<std::string, std::string> kHyperAliases = {
    {"lr", "learning_rate"}, {"mom", "momentum"},    {"wd", "weight_decay"},
    {"bs", "batch_size"},    {"batch", "batch_size"},
};

template <std::size_t N> bool in(const char *const (&list)[N], const std::string &s) {
  return std::any_of(std::begin(list), std::end(list), [&](const char *k) { return s == k; });
}

class Gate {
public:
  GateOutcome out;

  void fix(std::string path, std::string rule, ojson from, ojson to) {
    out.fixes.push_back({std::move(path), std::move(rule), std::move(from), std::move(to)});
  }
  void reject(std::string path, std::string rule, ojson found, std::string expected) {
    out.diagnostics.push_back({std::move(path), std::move(rule), std::move(found),
                               std::move(expected)});
  }

  // Renames aliases in place, keeping position. Returns false on a clash.
  ojson dealias(const ojson &obj, const std::map<std::string, std::string> &aliases,
                const std::string &prefix) {
    ojson res = ojson::object();
    std::set<std::string> canonical_present;
    for (const auto &[k, v] : obj.items())
      if (!aliases.count(k))
        canonical_present.insert(k);
    for (const auto &[k, v] : obj.items()) {
      auto a = aliases.find(k);
      if (a == aliases.end()) {
        res[k] = v;
        continue;
      }
      const std::string &to = a->second;
      if (canonical_present.count(to) || res.contains(to)) {
        reject(prefix + to, "DuplicateKey", v, "one of '" + k + "' or '" + to + "'");
        continue;
      }
      fix(prefix + k, "Alias", k, to);
      res[to] = v;
    }
    return res;
  }

  std::optional<ojson> integer(const ojson &v, const std::string &path) {
    ojson x = v;
    if (x.is_string()) {
      auto n = number_from(x.get<std::string>());
      if (!n) {
        reject(path, "Type", v, "integer");
        return std::nullopt;
      }
      fix(path, "StringToNumber", v, *n);
      x = *n;
    }
    if (x.is_number_float()) {
      const double d = x.get<double>();
      if (std::floor(d) != d || std::fabs(d) > 9e15) {
        reject(path, "Type", v, "integer");
        return std::nullopt;
      }
      const ojson i = static_cast<std::int64_t>(d);
      fix(path, "FloatToInt", x, i);
      x = i;
    }
    if (!x.is_number_integer()) {
      reject(path, "Type", v, "integer");
      return std::nullopt;
    }
    return x;
  }

  std::optional<ojson> number(const ojson &v, const std::string &path) {
    if (v.is_string()) {
      auto n = number_from(v.get<std::string>());
      if (!n) {
        reject(path, "Type", v, "number");
        return std::nullopt;
      }
      fix(path, "StringToNumber", v, *n);
      return n;
    }
    if (!v.is_number()) {
      reject(path, "Type", v, "number");
      return std::nullopt;
    }
    return v;
  }

  std::optional<ojson> text(const ojson &v, const std::string &path) {
    if (!v.is_string() || v.get<std::string>().empty()) {
      reject(path, "Type", v, "non-empty string");
      return std::nullopt;
    }
    return v;
  }
};

bool key_order_ok(const std::vector<std::string> &given, const std::vector<std::string> &want) {
  return given == want;
}

} // namespace

GateOutcome validate_spec(std::string_view document) {
  Gate g;
  auto parsed = parse_document(document);
  if (!parsed.error.empty() && parsed.duplicates.empty()) {
    g.reject("", "NotStructured", nullptr, "YAML or JSON mapping");
    g.out.status = Status::Reject;
    g.out.diagnostics.back().found = parsed.error;
    return g.out;
  }
  for (auto &d : parsed.duplicates)
    g.out.diagnostics.push_back(std::move(d));
  if (!parsed.error.empty() || !parsed.doc.is_object()) {
    if (g.out.diagnostics.empty())
      g.reject("", "NotStructured", parsed.doc, "YAML or JSON mapping");
    g.out.status = Status::Reject;
    return g.out;
  }

  ojson doc = g.dealias(parsed.doc, kTopAliases, "");
  ojson canon = ojson::object();
  for (const auto &[k, v] : doc.items())
    if (!in(kTopLevelKeys, k))
      g.reject(k, "UnknownKey", v, "one of the trainspec.v1 keys");

  auto need = [&](const char *key) -> const ojson * {
    if (!doc.contains(key)) {
      g.reject(key, "Missing", nullptr, "present");
      return nullptr;
    }
    return &doc[key];
  };

  for (const char *key : kTopLevelKeys) {
    const std::string k = key;
    if (k == "scheduler") {
      if (doc.contains("scheduler")) {
        const auto &v = doc["scheduler"];
        if (v.is_string() || v.is_object())
          canon["scheduler"] = v;
        else
          g.reject("scheduler", "Type", v, "string or mapping");
      }
      continue;
    }
    const ojson *v = need(key);
    if (!v)
      continue;
    if (k == "epochs") {
      if (auto i = g.integer(*v, k)) {
        if (i->get<std::int64_t>() < 1)
          g.reject(k, "Range", *i, ">= 1");
        else
          canon[k] = *i;
      }
    } else if (k == "optimizer") {
      if (auto s = g.text(*v, k)) {
        std::string name = s->get<std::string>();
        std::string lower = name;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (!in(kOptimizers, lower)) {
          g.reject(k, "UnknownOptimizer", *v,
                   "one of adadelta, adagrad, adam, adamw, nadam, radam, rmsprop, sgd");
        } else {
          if (lower != name)
            g.fix(k, "CaseNormalize", name, lower);
          canon[k] = lower;
        }
      }
    } else if (k == "hyperparameters") {
      if (!v->is_object()) {
        g.reject(k, "Type", *v, "mapping");
        continue;
      }
      ojson hp = g.dealias(*v, kHyperAliases, "hyperparameters.");
      std::vector<std::string> given, want;
      for (const auto &[hk, _] : hp.items())
        given.push_back(hk);
      ojson chp = ojson::object();
      for (const char *rk : kHyperparameterKeys) {
        const std::string path = std::string("hyperparameters.") + rk;
        if (!hp.contains(rk)) {
          g.reject(path, "Missing", nullptr, "present");
          continue;
        }
        want.push_back(rk);
        const std::string r = rk;
        if (r == "batch_size") {
          if (auto i = g.integer(hp[rk], path)) {
            if (i->get<std::int64_t>() <= 0)
              g.reject(path, "Range", *i, "positive integer");
            else
              chp[rk] = *i;
          }
          continue;
        }
        auto n = g.number(hp[rk], path);
        if (!n)
          continue;
        const double d = n->get<double>();
        if (r == "learning_rate") {
          if (!(d > 0 && d <= 1))
            g.reject(path, "Range", *n, "(0,1]");
          else
            chp[rk] = *n;
        } else if (!(d >= 0 && d < 1)) {
          g.reject(path, "Range", *n, "[0,1)");
        } else {
          chp[rk] = *n;
        }
      }
      std::vector<std::string> extras;
      for (const auto &[hk, _] : hp.items())
        if (!in(kHyperparameterKeys, hk))
          extras.push_back(hk);
      std::sort(extras.begin(), extras.end());
      for (const auto &e : extras) {
        want.push_back(e);
        chp[e] = hp[e];
      }
      std::vector<std::string> present;
      for (const auto &x : given)
        if (std::find(want.begin(), want.end(), x) != want.end())
          present.push_back(x);
      if (!key_order_ok(present, want))
        g.fix("hyperparameters", "KeyOrder", present, want);
      canon[k] = chp;
    } else {
      if (auto s = g.text(*v, k))
        canon[k] = *s;
    }
  }

  if (!g.out.diagnostics.empty()) {
    g.out.status = Status::Reject;
    return g.out;
  }
  g.out.status = g.out.fixes.empty() ? Status::Pass : Status::Autofixed;
  g.out.canonical = canon;
  return g.out;
}

RetryGate::RetryGate(std::filesystem::path file) : file_(std::move(file)) {
  std::error_code ec;
  if (file_->has_parent_path())
    std::filesystem::create_directories(file_->parent_path(), ec);
}

std::uint64_t RetryGate::bump(const std::string &lineage) {
  if (!file_)
    return counts_[lineage]++;
  const int fd = ::open(file_->c_str(), O_RDWR | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0)
    throw StoreError("cannot open retry ledger " + file_->string() + ": " + std::strerror(errno));
  ::flock(fd, LOCK_EX);
  std::uint64_t seen = 0;
  {
    std::ifstream in(*file_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty())
        continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_object() && j.value("lineage", "") == lineage)
        ++seen;
    }
  }
  const std::string rec = nlohmann::json{{"lineage", lineage}}.dump() + "\n";
  const bool ok = ::write(fd, rec.data(), rec.size()) == static_cast<ssize_t>(rec.size());
  ::fdatasync(fd);
  ::flock(fd, LOCK_UN);
  ::close(fd);
  if (!ok)
    throw StoreError("cannot append to retry ledger " + file_->string());
  return seen;
}

bool RetryGate::check(GateOutcome &outcome, const std::string &lineage) {
  if (outcome.status != Status::Reject) {
    outcome.retry_allowed = false;
    return false;
  }
  std::lock_guard lock(mutex_);
  outcome.retry_allowed = bump(lineage) == 0;
  return outcome.retry_allowed;
}

std::uint64_t RetryGate::rejections(const std::string &lineage) {
  std::lock_guard lock(mutex_);
  if (!file_) {
    auto it = counts_.find(lineage);
    return it == counts_.end() ? 0 : it->second;
  }
  std::uint64_t seen = 0;
  std::ifstream in(*file_);
  std::string line;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_object() && j.value("lineage", "") == lineage)
      ++seen;
  }
  return seen;
}

} // namespace scopeweaver::specgate
