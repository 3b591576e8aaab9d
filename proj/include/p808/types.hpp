#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace p808 {

// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

enum class Method { ACR, DCR, CCR };

enum class StimulusRole { rating, training, trapping, gold, reference, env_pair };

enum class PresentationOrder { reference_first, processed_first };

enum class CertificateKind { qualification, environment };

std::string_view to_string(Method m);
std::string_view to_string(StimulusRole r);
std::string_view to_string(PresentationOrder o);
std::string_view to_string(CertificateKind k);

Method method_from_string(std::string_view s);
StimulusRole role_from_string(std::string_view s);
PresentationOrder order_from_string(std::string_view s);
CertificateKind certificate_kind_from_string(std::string_view s);

// Opinion scale of a test method. Labels are ordered from min to max.
struct RatingScale {
  Method method = Method::ACR;
  int min = 1;
  int max = 5;
  std::vector<std::string> labels;

  static RatingScale for_method(Method m);

  bool contains(int value) const { return value >= min && value <= max; }
  int levels() const { return max - min + 1; }
  const std::string& label(int value) const;
  // Throws ValidationError when min/max/labels disagree with the method.
  void validate() const;

  friend bool operator==(const RatingScale&, const RatingScale&) = default;
};

struct Stimulus {
  std::string id;
  std::string url;
  StimulusRole role = StimulusRole::rating;
  std::optional<std::string> condition;
  std::optional<int> expected_answer;  // trapping and gold only
  std::optional<int> tolerance;        // gold only
  // Reference clip of a DCR/CCR pair; the stimulus itself is the processed clip.
  std::optional<std::string> reference_url;

  void validate(const RatingScale& scale) const;

  friend bool operator==(const Stimulus&, const Stimulus&) = default;
};

struct Condition {
  std::string label;
  std::vector<std::string> stimuli;
  bool is_reference = false;

  friend bool operator==(const Condition&, const Condition&) = default;
};

struct Rating {
  std::string stimulus_id;
  std::string worker_id;
  std::string session_id;
  int value = 0;
  std::optional<PresentationOrder> presentation_order;  // CCR only
  Timestamp timestamp = 0;
  std::optional<std::string> condition;

  void validate(const RatingScale& scale) const;

  friend bool operator==(const Rating&, const Rating&) = default;
};

struct Certificate {
  CertificateKind kind = CertificateKind::environment;
  std::string worker_id;
  Timestamp issued_at = 0;
  std::int64_t ttl_seconds = 0;  // 0 = never expires
  std::string signature;         // lowercase hex HMAC-SHA256

  static constexpr std::int64_t kEnvironmentTtl = 1800;

  bool expires() const { return ttl_seconds > 0; }
  Timestamp expires_at() const { return issued_at + ttl_seconds; }

  friend bool operator==(const Certificate&, const Certificate&) = default;
};

void to_json(nlohmann::json& j, const RatingScale& s);
void from_json(const nlohmann::json& j, RatingScale& s);
void to_json(nlohmann::json& j, const Stimulus& s);
void from_json(const nlohmann::json& j, Stimulus& s);
void to_json(nlohmann::json& j, const Condition& c);
void from_json(const nlohmann::json& j, Condition& c);
void to_json(nlohmann::json& j, const Rating& r);
void from_json(const nlohmann::json& j, Rating& r);
void to_json(nlohmann::json& j, const Certificate& c);
void from_json(const nlohmann::json& j, Certificate& c);

}  // namespace p808
