#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "p808/types.hpp"

namespace p808 {

inline constexpr int kConfigSchemaVersion = 1;

// A trapping or gold clip supplied by the experimenter.
struct ControlClip {
  std::string url;
  int expected_answer = 0;
  std::optional<int> tolerance;             // gold only; defaults to ExperimentConfig::gold_tolerance
  std::optional<std::string> reference_url;  // DCR/CCR gold pairs
  std::optional<std::string> id;             // defaults to url

  friend bool operator==(const ControlClip&, const ControlClip&) = default;
};

// One pair of the environment suitability test. `better` is 1 or 2.
struct EnvironmentPair {
  std::string first_url;
  std::string second_url;
  int better = 1;

  friend bool operator==(const EnvironmentPair&, const EnvironmentPair&) = default;
};

struct FilterToggles {
  bool playback = true;
  bool earpods = true;
  bool trapping = true;
  bool environment = true;
  bool gold = true;
  bool variance = true;
  bool qualification = true;
  bool certificate_integrity = true;
  bool headset = false;  // advisory unless switched on

  friend bool operator==(const FilterToggles&, const FilterToggles&) = default;
};

struct EnvironmentSettings {
  bool enabled = true;
  int pair_count = 4;
  int min_correct = 4;
  std::int64_t certificate_ttl_seconds = Certificate::kEnvironmentTtl;
  std::vector<EnvironmentPair> pairs;

  friend bool operator==(const EnvironmentSettings&, const EnvironmentSettings&) = default;
};

struct VarianceSettings {
  int min_distinct = 2;
  double min_sd = 0.0;  // 0 disables the SD check

  friend bool operator==(const VarianceSettings&, const VarianceSettings&) = default;
};

struct BonusSettings {
  std::int64_t amount_minor = 0;  // currency minor units; 0 disables bonuses
  std::string currency = "USD";
  bool require_usable = false;
  std::string message = "Thank you for your careful ratings.";

  friend bool operator==(const BonusSettings&, const BonusSettings&) = default;
};

struct AnalysisSettings {
  double alpha = 0.05;
  // Condition cells with fewer votes are dropped from per-run score matrices.
  int min_votes_per_condition = 1;
  // Minimum number of complete conditions needed to analyze a group.
  int min_conditions = 3;
  // Sample size for the Fisher-z test: "conditions" (complete conditions of the
  // group) or "submissions" (submissions in the group, summed over runs).
  std::string fisher_n = "conditions";

  friend bool operator==(const AnalysisSettings&, const AnalysisSettings&) = default;
};

// Where the experiment secret comes from: an environment variable or a literal.
struct SecretRef {
  std::optional<std::string> env;
  std::optional<std::string> value;

  friend bool operator==(const SecretRef&, const SecretRef&) = default;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  Method method = Method::ACR;
  std::vector<std::string> scale_labels;  // empty = method defaults
  std::string condition_pattern;          // empty = no conditions
  std::optional<std::string> reference_condition;

  int rating_block_size = 12;
  int votes_target = 5;
  double safety_factor = 1.3;
  int gold_tolerance = 1;
  double trapping_prefix_seconds = 3.0;

  std::vector<ControlClip> trapping_pool;
  std::vector<ControlClip> gold_pool;
  std::string training_set_id = "training-1";
  std::vector<std::string> training_clips;
  std::optional<int> earpods_answer;  // answer key of the two-eared headphone check

  EnvironmentSettings environment;
  FilterToggles filters;
  VarianceSettings variance;
  std::vector<int> ccr_trapping_accept{0};
  std::vector<std::string> headset_keywords{"headset",  "headphone", "earphone", "earbud",
                                            "airpods",  "buds",      "hands-free",
                                            "handsfree"};
  BonusSettings bonus;
  // Conditions with fewer usable votes are left out of per-condition reports.
  int min_votes_per_condition = 1;
  AnalysisSettings analysis;
  SecretRef secret;
  bool embed_build_timestamp = false;
  std::optional<std::string> plan_checksum;

  RatingScale scale() const;
  // Throws ConfigError on any inconsistency.
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

// Parse + validate. Throws ConfigError.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string dump_config(const ExperimentConfig& config);

// Throws ConfigError when the referenced secret is unavailable or empty.
std::string resolve_secret(const SecretRef& ref);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace p808
