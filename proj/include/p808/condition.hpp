#pragma once

#include <optional>
#include <regex>
#include <string>
#include <string_view>

namespace p808 {

// Returned by condition_of when the pattern does not match.
inline constexpr std::string_view kUnconditioned = "unconditioned";

// Compiled condition-extraction pattern. The pattern must contain exactly one
// capture group; the captured text is the condition label.
class ConditionPattern {
 public:
  explicit ConditionPattern(std::string pattern);

  const std::string& pattern() const { return source_; }
  // Captured label, or nullopt when the pattern does not occur in `url`.
  std::optional<std::string> match(std::string_view url) const;

 private:
  std::string source_;
  std::regex regex_;
};

// Label captured from `stimulus_url`, or kUnconditioned if there is no match.
// Throws ConfigError on a malformed pattern or a capture-group count other than one.
std::string condition_of(std::string_view stimulus_url, const std::string& pattern);

}  // namespace p808
