#include "p808/condition.hpp"

#include "p808/error.hpp"

namespace p808 {

namespace {

std::regex compile(const std::string& pattern) {
  try {
    return std::regex(pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw ConfigError("malformed condition pattern '" + pattern + "': " + e.what());
  }
}

}  // namespace

ConditionPattern::ConditionPattern(std::string pattern)
    : source_(std::move(pattern)), regex_(compile(source_)) {
  if (regex_.mark_count() != 1) {
    throw ConfigError("condition pattern '" + source_ + "' must contain exactly one capture group");
  }
}

std::optional<std::string> ConditionPattern::match(std::string_view url) const {
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(url.begin(), url.end(), m, regex_) || !m[1].matched) {
    return std::nullopt;
  }
  return m[1].str();
}

std::string condition_of(std::string_view stimulus_url, const std::string& pattern) {
  return ConditionPattern(pattern).match(stimulus_url).value_or(std::string(kUnconditioned));
}

}  // namespace p808
