#include "polarquant/layout.hpp"

#include <fnmatch.h>

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace polarquant {

bool is_valid_glob(std::string_view pattern) {
  if (pattern.empty()) return false;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] == '\\') {
      ++i;
      if (i == pattern.size()) return false;
    } else if (pattern[i] == '[') {
      std::size_t j = i + 1;
      if (j < pattern.size() && (pattern[j] == '!' || pattern[j] == '^')) ++j;
      if (j < pattern.size() && pattern[j] == ']') ++j;  // leading ']' is literal
      while (j < pattern.size() && pattern[j] != ']') ++j;
      if (j == pattern.size()) return false;
      i = j;
    }
  }
  return true;
}

bool glob_match(std::string_view pattern, std::string_view text) {
  const std::string p(pattern);
  const std::string t(text);
  return ::fnmatch(p.c_str(), t.c_str(), 0) == 0;
}

LayoutSpec::LayoutSpec(std::vector<Rule> rules) : rules_(std::move(rules)) {
  for (const auto& r : rules_) {
    if (!is_valid_glob(r.pattern)) {
      throw std::invalid_argument("layout: invalid glob pattern '" + r.pattern + "'");
    }
  }
}

LayoutSpec LayoutSpec::parse(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("layout: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("rules") || !doc["rules"].is_array()) {
    throw std::invalid_argument("layout: expected an object with a \"rules\" array");
  }
  std::vector<Rule> rules;
  for (const auto& entry : doc["rules"]) {
    if (!entry.is_object() || !entry.contains("pattern") || !entry.contains("role") ||
        !entry["pattern"].is_string() || !entry["role"].is_string()) {
      throw std::invalid_argument("layout: every rule needs string \"pattern\" and \"role\" fields");
    }
    rules.push_back({entry["pattern"].get<std::string>(),
                     parse_role(entry["role"].get<std::string>())});
  }
  return LayoutSpec(std::move(rules));
}

LayoutSpec LayoutSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open layout file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::optional<TensorRole> LayoutSpec::match(std::string_view tensor_name) const {
  for (const auto& r : rules_) {
    if (glob_match(r.pattern, tensor_name)) return r.role;
  }
  return std::nullopt;
}

TensorRole LayoutSpec::resolve(std::string_view tensor_name) const {
  if (auto role = match(tensor_name)) return *role;
  throw std::invalid_argument("layout: no rule matches tensor '" + std::string(tensor_name) + "'");
}

}  // namespace polarquant
