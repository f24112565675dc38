#include "scopeweaver/scanner/config.hpp"

#include <algorithm>

#include "scopeweaver/digest.hpp"
#include "scopeweaver/errors.hpp"
#include "scopeweaver/fileio.hpp"

using nlohmann::json;

namespace scopeweaver::scanner {

bool is_category(std::string_view label) noexcept {
  return std::find(kCategories.begin(), kCategories.end(), label) != kCategories.end();
}

std::vector<CategoryRule> ScanConfig::default_category_rules() {
  return {
      {"Loss$|Criterion$", "losses"},
      {"Attention|Attn", "attention"},
      {"Transformer|Bert|Swin|EncoderLayer|DecoderLayer", "transformer_blocks"},
      {"Pool", "pooling"},
      {"Norm", "normalization"},
      {"Conv", "convolutions"},
      {"ResNet|EfficientNet|VGG|MobileNet|DenseNet|Inception|Net$|Model$", "architectures"},
  };
}

namespace {

std::vector<std::string> string_list(const json &j, const char *key) {
  if (!j.is_array())
    throw ConfigError(std::string("'") + key + "' must be an array of strings");
  std::vector<std::string> out;
  for (const auto &v : j) {
    if (!v.is_string())
      throw ConfigError(std::string("'") + key + "' must be an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

} // namespace

ScanConfig ScanConfig::from_json(const json &j) {
  if (!j.is_object())
    throw ConfigError("scan config must be a JSON object");
  ScanConfig cfg;
  for (const auto &[key, value] : j.items()) {
    if (key == "base_patterns") {
      cfg.base_patterns = string_list(value, "base_patterns");
    } else if (key == "extensions") {
      cfg.extensions = string_list(value, "extensions");
      for (const auto &ext : cfg.extensions)
        if (ext.empty() || ext.front() != '.')
          throw ConfigError("extension '" + ext + "' must start with '.'");
    } else if (key == "category_rules") {
      if (!value.is_array())
        throw ConfigError("'category_rules' must be an array");
      cfg.category_rules.clear();
      for (const auto &r : value) {
        if (!r.is_object() || !r.contains("pattern") || !r.contains("category") ||
            !r["pattern"].is_string() || !r["category"].is_string())
          throw ConfigError("category rule needs string 'pattern' and 'category'");
        CategoryRule rule{r["pattern"].get<std::string>(), r["category"].get<std::string>()};
        if (!is_category(rule.category))
          throw ConfigError("unknown category '" + rule.category + "'");
        try {
          std::regex test(rule.pattern);
        } catch (const std::regex_error &e) {
          throw ConfigError("bad pattern '" + rule.pattern + "': " + e.what());
        }
        cfg.category_rules.push_back(std::move(rule));
      }
    } else {
      throw ConfigError("unknown scan config key '" + key + "'");
    }
  }
  return cfg;
}

ScanConfig ScanConfig::load(const std::filesystem::path &file) {
  const std::string text = read_file(file);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error &e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  return from_json(j);
}

json ScanConfig::to_json() const {
  json rules = json::array();
  for (const auto &r : category_rules)
    rules.push_back({{"pattern", r.pattern}, {"category", r.category}});
  return {{"base_patterns", base_patterns}, {"category_rules", rules}, {"extensions", extensions}};
}

std::string ScanConfig::digest() const { return sha1_hex(to_json().dump()); }

CategoryClassifier::CategoryClassifier(const std::vector<CategoryRule> &rules) {
  for (const auto &r : rules)
    rules_.emplace_back(std::regex(r.pattern), r.category);
}

std::string CategoryClassifier::classify(const std::string &name,
                                         const std::vector<std::string> &bases) const {
  for (const auto &[re, category] : rules_)
    if (std::regex_search(name, re))
      return category;
  for (const auto &base : bases) {
    const auto dot = base.rfind('.');
    const std::string last = dot == std::string::npos ? base : base.substr(dot + 1);
    for (const auto &[re, category] : rules_)
      if (std::regex_search(last, re))
        return category;
  }
  return std::string(kFallbackCategory);
}

} // namespace scopeweaver::scanner
