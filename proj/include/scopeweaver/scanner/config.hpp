#pragma once

#include <array>
#include <filesystem>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace scopeweaver::scanner {

/// Reporting taxonomy for block candidates.
inline constexpr std::array<std::string_view, 8> kCategories = {
    "attention", "convolutions", "transformer_blocks", "pooling",
    "normalization", "losses", "architectures", "utilities"};

inline constexpr std::string_view kFallbackCategory = "utilities";

bool is_category(std::string_view label) noexcept;

struct CategoryRule {
  std::string pattern; // ECMAScript regex searched in the class name
  std::string category;
};

struct ScanConfig {
  std::vector<std::string> base_patterns{"nn.Module", "torch.nn.Module", "Module"};
  std::vector<CategoryRule> category_rules = default_category_rules();
  std::vector<std::string> extensions{".py"};

  static std::vector<CategoryRule> default_category_rules();

  /// Missing keys keep their defaults. Throws ConfigError.
  static ScanConfig from_json(const nlohmann::json &j);
  static ScanConfig load(const std::filesystem::path &file);

  nlohmann::json to_json() const;
  /// SHA-1 of the canonical JSON form.
  std::string digest() const;
};

/// First-match category rules, compiled once.
class CategoryClassifier {
public:
  explicit CategoryClassifier(const std::vector<CategoryRule> &rules);

  /// Rules are tried against the name first, then against the last dotted
  /// component of each base expression. Unmatched names are utilities.
  std::string classify(const std::string &name,
                       const std::vector<std::string> &bases = {}) const;

private:
  std::vector<std::pair<std::regex, std::string>> rules_;
};

} // namespace scopeweaver::scanner
