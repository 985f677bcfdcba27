#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polarquant/polar_codec.hpp"

namespace polarquant {

/// Ordered (glob, role) rules mapping tensor names to mixed-bit roles.
///
/// Config file (JSON):
///
///   { "rules": [ { "pattern": "*.mlp.gate_proj.*", "role": "mlp_gate_up" }, ... ] }
///
/// Patterns use shell glob syntax (`*`, `?`, `[...]`); the first matching
/// rule wins.
class LayoutSpec {
 public:
  struct Rule {
    std::string pattern;
    TensorRole role;
  };

  LayoutSpec() = default;
  explicit LayoutSpec(std::vector<Rule> rules);

  static LayoutSpec parse(std::string_view json_text);
  static LayoutSpec load(const std::filesystem::path& path);

  const std::vector<Rule>& rules() const noexcept { return rules_; }

  std::optional<TensorRole> match(std::string_view tensor_name) const;
  /// Like match, but throws std::invalid_argument naming the tensor if no rule applies.
  TensorRole resolve(std::string_view tensor_name) const;

 private:
  std::vector<Rule> rules_;
};

bool glob_match(std::string_view pattern, std::string_view text);
/// True if brackets are balanced and the pattern is non-empty.
bool is_valid_glob(std::string_view pattern);

}  // namespace polarquant
