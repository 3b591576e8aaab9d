#include "p808/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "p808/condition.hpp"
#include "p808/error.hpp"

namespace p808 {

namespace {

using nlohmann::json;

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

template <typename T>
void read_opt(const json& j, const char* key, std::optional<T>& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

json control_to_json(const ControlClip& c) {
  json j = {{"url", c.url}, {"expected_answer", c.expected_answer}};
  if (c.tolerance) j["tolerance"] = *c.tolerance;
  if (c.reference_url) j["reference_url"] = *c.reference_url;
  if (c.id) j["id"] = *c.id;
  return j;
}

ControlClip control_from_json(const json& j) {
  ControlClip c;
  c.url = j.at("url").get<std::string>();
  c.expected_answer = j.at("expected_answer").get<int>();
  read_opt(j, "tolerance", c.tolerance);
  read_opt(j, "reference_url", c.reference_url);
  read_opt(j, "id", c.id);
  return c;
}

}  // namespace

RatingScale ExperimentConfig::scale() const {
  auto s = RatingScale::for_method(method);
  if (!scale_labels.empty()) s.labels = scale_labels;
  try {
    s.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("scale/config mismatch: ") + e.what());
  }
  return s;
}

void ExperimentConfig::validate() const {
  if (schema_version != kConfigSchemaVersion) {
    throw ConfigError("unsupported config schema_version " + std::to_string(schema_version));
  }
  const auto s = scale();
  if (!condition_pattern.empty()) ConditionPattern{condition_pattern};
  if (rating_block_size < 1) throw ConfigError("rating_block_size must be positive");
  if (votes_target < 1) throw ConfigError("votes_target must be positive");
  if (safety_factor < 1.0) throw ConfigError("safety_factor must be >= 1");
  if (gold_tolerance < 0) throw ConfigError("gold_tolerance must be non-negative");
  if (trapping_prefix_seconds < 0) throw ConfigError("trapping_prefix_seconds must be >= 0");
  for (const auto& clip : trapping_pool) {
    if (!s.contains(clip.expected_answer)) {
      throw ConfigError("trapping clip '" + clip.url + "' expects an answer outside the scale");
    }
  }
  for (const auto& clip : gold_pool) {
    if (!s.contains(clip.expected_answer)) {
      throw ConfigError("gold clip '" + clip.url + "' expects an answer outside the scale");
    }
    if (clip.tolerance && *clip.tolerance < 0) {
      throw ConfigError("gold clip '" + clip.url + "' has a negative tolerance");
    }
    if (method != Method::ACR && !clip.reference_url) {
      throw ConfigError("gold clip '" + clip.url + "' needs a reference_url for paired methods");
    }
  }
  if (environment.enabled) {
    if (environment.pair_count < 1) throw ConfigError("environment.pair_count must be positive");
    if (environment.min_correct < 0 || environment.min_correct > environment.pair_count) {
      throw ConfigError("environment.min_correct must lie in [0, pair_count]");
    }
    if (!environment.pairs.empty() &&
        environment.pairs.size() != static_cast<std::size_t>(environment.pair_count)) {
      throw ConfigError("environment.pairs lists " + std::to_string(environment.pairs.size()) +
                        " pairs but pair_count is " + std::to_string(environment.pair_count));
    }
    for (const auto& p : environment.pairs) {
      if (p.better != 1 && p.better != 2) {
        throw ConfigError("environment pair 'better' must be 1 or 2");
      }
    }
  }
  if (environment.certificate_ttl_seconds <= 0) {
    throw ConfigError("environment.certificate_ttl_seconds must be positive");
  }
  if (variance.min_distinct < 1) throw ConfigError("variance.min_distinct must be >= 1");
  if (variance.min_sd < 0) throw ConfigError("variance.min_sd must be >= 0");
  if (ccr_trapping_accept.empty()) throw ConfigError("ccr_trapping_accept must not be empty");
  if (bonus.amount_minor < 0) throw ConfigError("bonus.amount_minor must be >= 0");
  if (min_votes_per_condition < 1) throw ConfigError("min_votes_per_condition must be >= 1");
  if (analysis.alpha <= 0 || analysis.alpha >= 1) throw ConfigError("analysis.alpha in (0,1)");
  if (analysis.min_votes_per_condition < 1) {
    throw ConfigError("analysis.min_votes_per_condition must be >= 1");
  }
  if (analysis.min_conditions < 3) throw ConfigError("analysis.min_conditions must be >= 3");
  if (analysis.fisher_n != "conditions" && analysis.fisher_n != "submissions") {
    throw ConfigError("analysis.fisher_n must be 'conditions' or 'submissions'");
  }
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  json trapping = json::array();
  for (const auto& t : c.trapping_pool) trapping.push_back(control_to_json(t));
  json gold = json::array();
  for (const auto& g : c.gold_pool) gold.push_back(control_to_json(g));
  json pairs = json::array();
  for (const auto& p : c.environment.pairs) {
    pairs.push_back({{"first_url", p.first_url}, {"second_url", p.second_url}, {"better", p.better}});
  }
  json secret = json::object();
  if (c.secret.env) secret["env"] = *c.secret.env;
  if (c.secret.value) secret["value"] = *c.secret.value;

  j = json{
      {"schema_version", c.schema_version},
      {"method", to_string(c.method)},
      {"scale_labels", c.scale_labels},
      {"condition_pattern", c.condition_pattern},
      {"rating_block_size", c.rating_block_size},
      {"votes_target", c.votes_target},
      {"safety_factor", c.safety_factor},
      {"gold_tolerance", c.gold_tolerance},
      {"trapping_prefix_seconds", c.trapping_prefix_seconds},
      {"trapping_pool", trapping},
      {"gold_pool", gold},
      {"training_set_id", c.training_set_id},
      {"training_clips", c.training_clips},
      {"environment",
       {{"enabled", c.environment.enabled},
        {"pair_count", c.environment.pair_count},
        {"min_correct", c.environment.min_correct},
        {"certificate_ttl_seconds", c.environment.certificate_ttl_seconds},
        {"pairs", pairs}}},
      {"filters",
       {{"playback", c.filters.playback},
        {"earpods", c.filters.earpods},
        {"trapping", c.filters.trapping},
        {"environment", c.filters.environment},
        {"gold", c.filters.gold},
        {"variance", c.filters.variance},
        {"qualification", c.filters.qualification},
        {"certificate_integrity", c.filters.certificate_integrity},
        {"headset", c.filters.headset}}},
      {"variance", {{"min_distinct", c.variance.min_distinct}, {"min_sd", c.variance.min_sd}}},
      {"ccr_trapping_accept", c.ccr_trapping_accept},
      {"headset_keywords", c.headset_keywords},
      {"bonus",
       {{"amount_minor", c.bonus.amount_minor},
        {"currency", c.bonus.currency},
        {"require_usable", c.bonus.require_usable},
        {"message", c.bonus.message}}},
      {"min_votes_per_condition", c.min_votes_per_condition},
      {"analysis",
       {{"alpha", c.analysis.alpha},
        {"min_votes_per_condition", c.analysis.min_votes_per_condition},
        {"min_conditions", c.analysis.min_conditions},
        {"fisher_n", c.analysis.fisher_n}}},
      {"secret", secret},
      {"embed_build_timestamp", c.embed_build_timestamp},
  };
  if (c.reference_condition) j["reference_condition"] = *c.reference_condition;
  if (c.earpods_answer) j["earpods_answer"] = *c.earpods_answer;
  if (c.plan_checksum) j["plan_checksum"] = *c.plan_checksum;
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  read_opt(j, "schema_version", c.schema_version);
  if (auto it = j.find("method"); it != j.end()) {
    c.method = method_from_string(it->get<std::string>());
  }
  read_opt(j, "scale_labels", c.scale_labels);
  read_opt(j, "condition_pattern", c.condition_pattern);
  read_opt(j, "reference_condition", c.reference_condition);
  read_opt(j, "rating_block_size", c.rating_block_size);
  read_opt(j, "votes_target", c.votes_target);
  read_opt(j, "safety_factor", c.safety_factor);
  read_opt(j, "gold_tolerance", c.gold_tolerance);
  read_opt(j, "trapping_prefix_seconds", c.trapping_prefix_seconds);
  if (auto it = j.find("trapping_pool"); it != j.end()) {
    for (const auto& e : *it) c.trapping_pool.push_back(control_from_json(e));
  }
  if (auto it = j.find("gold_pool"); it != j.end()) {
    for (const auto& e : *it) c.gold_pool.push_back(control_from_json(e));
  }
  read_opt(j, "training_set_id", c.training_set_id);
  read_opt(j, "training_clips", c.training_clips);
  read_opt(j, "earpods_answer", c.earpods_answer);
  if (auto it = j.find("environment"); it != j.end()) {
    const auto& e = *it;
    read_opt(e, "enabled", c.environment.enabled);
    read_opt(e, "pair_count", c.environment.pair_count);
    read_opt(e, "min_correct", c.environment.min_correct);
    read_opt(e, "certificate_ttl_seconds", c.environment.certificate_ttl_seconds);
    if (auto p = e.find("pairs"); p != e.end()) {
      for (const auto& pair : *p) {
        c.environment.pairs.push_back({pair.at("first_url").get<std::string>(),
                                       pair.at("second_url").get<std::string>(),
                                       pair.at("better").get<int>()});
      }
    }
  }
  if (auto it = j.find("filters"); it != j.end()) {
    const auto& f = *it;
    read_opt(f, "playback", c.filters.playback);
    read_opt(f, "earpods", c.filters.earpods);
    read_opt(f, "trapping", c.filters.trapping);
    read_opt(f, "environment", c.filters.environment);
    read_opt(f, "gold", c.filters.gold);
    read_opt(f, "variance", c.filters.variance);
    read_opt(f, "qualification", c.filters.qualification);
    read_opt(f, "certificate_integrity", c.filters.certificate_integrity);
    read_opt(f, "headset", c.filters.headset);
  }
  if (auto it = j.find("variance"); it != j.end()) {
    read_opt(*it, "min_distinct", c.variance.min_distinct);
    read_opt(*it, "min_sd", c.variance.min_sd);
  }
  read_opt(j, "ccr_trapping_accept", c.ccr_trapping_accept);
  read_opt(j, "headset_keywords", c.headset_keywords);
  if (auto it = j.find("bonus"); it != j.end()) {
    read_opt(*it, "amount_minor", c.bonus.amount_minor);
    read_opt(*it, "currency", c.bonus.currency);
    read_opt(*it, "require_usable", c.bonus.require_usable);
    read_opt(*it, "message", c.bonus.message);
  }
  read_opt(j, "min_votes_per_condition", c.min_votes_per_condition);
  if (auto it = j.find("analysis"); it != j.end()) {
    read_opt(*it, "alpha", c.analysis.alpha);
    read_opt(*it, "min_votes_per_condition", c.analysis.min_votes_per_condition);
    read_opt(*it, "min_conditions", c.analysis.min_conditions);
    read_opt(*it, "fisher_n", c.analysis.fisher_n);
  }
  if (auto it = j.find("secret"); it != j.end()) {
    read_opt(*it, "env", c.secret.env);
    read_opt(*it, "value", c.secret.value);
  }
  read_opt(j, "embed_build_timestamp", c.embed_build_timestamp);
  read_opt(j, "plan_checksum", c.plan_checksum);
}

ExperimentConfig parse_config(std::string_view json_text) {
  ExperimentConfig config;
  try {
    config = json::parse(json_text).get<ExperimentConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config JSON: ") + e.what());
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path));
}

std::string dump_config(const ExperimentConfig& config) {
  return json(config).dump(2) + "\n";
}

std::string resolve_secret(const SecretRef& ref) {
  if (ref.value && !ref.value->empty()) return *ref.value;
  if (ref.env) {
    if (const char* v = std::getenv(ref.env->c_str()); v != nullptr && *v != '\0') return v;
    throw ConfigError("secret environment variable '" + *ref.env + "' is not set");
  }
  throw ConfigError("no experiment secret configured");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

}  // namespace p808
