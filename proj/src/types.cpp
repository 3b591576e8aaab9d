#include "p808/types.hpp"

#include <array>
#include <utility>

#include "p808/error.hpp"

namespace p808 {

namespace {

template <typename E, std::size_t N>
E lookup(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view s,
         std::string_view what) {
  for (const auto& [value, name] : table) {
    if (name == s) return value;
  }
  throw ValidationError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E e) {
  for (const auto& [value, name] : table) {
    if (value == e) return name;
  }
  return "?";
}

constexpr std::array<std::pair<Method, std::string_view>, 3> kMethods{{
    {Method::ACR, "ACR"}, {Method::DCR, "DCR"}, {Method::CCR, "CCR"}}};

constexpr std::array<std::pair<StimulusRole, std::string_view>, 6> kRoles{{
    {StimulusRole::rating, "rating"},
    {StimulusRole::training, "training"},
    {StimulusRole::trapping, "trapping"},
    {StimulusRole::gold, "gold"},
    {StimulusRole::reference, "reference"},
    {StimulusRole::env_pair, "env_pair"}}};

constexpr std::array<std::pair<PresentationOrder, std::string_view>, 2> kOrders{{
    {PresentationOrder::reference_first, "reference_first"},
    {PresentationOrder::processed_first, "processed_first"}}};

constexpr std::array<std::pair<CertificateKind, std::string_view>, 2> kKinds{{
    {CertificateKind::qualification, "qualification"},
    {CertificateKind::environment, "environment"}}};

template <typename T>
void put_optional(nlohmann::json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <typename T>
void get_optional(const nlohmann::json& j, const char* key, std::optional<T>& v) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    v = it->get<T>();
  } else {
    v.reset();
  }
}

}  // namespace

std::string_view to_string(Method m) { return name_of(kMethods, m); }
std::string_view to_string(StimulusRole r) { return name_of(kRoles, r); }
std::string_view to_string(PresentationOrder o) { return name_of(kOrders, o); }
std::string_view to_string(CertificateKind k) { return name_of(kKinds, k); }

Method method_from_string(std::string_view s) { return lookup(kMethods, s, "method"); }
StimulusRole role_from_string(std::string_view s) { return lookup(kRoles, s, "stimulus role"); }
PresentationOrder order_from_string(std::string_view s) {
  return lookup(kOrders, s, "presentation order");
}
CertificateKind certificate_kind_from_string(std::string_view s) {
  return lookup(kKinds, s, "certificate kind");
}

RatingScale RatingScale::for_method(Method m) {
  switch (m) {
    case Method::ACR:
      return {m, 1, 5, {"Bad", "Poor", "Fair", "Good", "Excellent"}};
    case Method::DCR:
      return {m,
              1,
              5,
              {"Degradation is very annoying", "Degradation is annoying",
               "Degradation is slightly annoying", "Degradation is audible but not annoying",
               "Degradation is inaudible"}};
    case Method::CCR:
      return {m,
              -3,
              3,
              {"Much Worse", "Worse", "Slightly Worse", "About the Same", "Slightly Better",
               "Better", "Much Better"}};
  }
  throw ValidationError("unknown method");
}

const std::string& RatingScale::label(int value) const {
  if (!contains(value) || labels.size() != static_cast<std::size_t>(levels())) {
    throw ValidationError("no label for value " + std::to_string(value));
  }
  return labels[static_cast<std::size_t>(value - min)];
}

void RatingScale::validate() const {
  const auto canonical = for_method(method);
  if (min != canonical.min || max != canonical.max) {
    throw ValidationError(std::string(to_string(method)) + " scale must span [" +
                          std::to_string(canonical.min) + ", " + std::to_string(canonical.max) +
                          "]");
  }
  if (labels.size() != static_cast<std::size_t>(levels())) {
    throw ValidationError(std::string(to_string(method)) + " scale needs " +
                          std::to_string(levels()) + " labels, got " +
                          std::to_string(labels.size()));
  }
}

void Stimulus::validate(const RatingScale& scale) const {
  if (id.empty()) throw ValidationError("stimulus without id");
  const bool control = role == StimulusRole::trapping || role == StimulusRole::gold;
  if (control != expected_answer.has_value()) {
    throw ValidationError("stimulus '" + id + "': expected_answer is required for trapping/gold "
                          "stimuli and forbidden otherwise");
  }
  if (expected_answer && !scale.contains(*expected_answer)) {
    throw ValidationError("stimulus '" + id + "': expected_answer " +
                          std::to_string(*expected_answer) + " outside the scale");
  }
  if (tolerance) {
    if (role != StimulusRole::gold) {
      throw ValidationError("stimulus '" + id + "': tolerance only applies to gold stimuli");
    }
    if (*tolerance < 0) throw ValidationError("stimulus '" + id + "': negative tolerance");
  }
}

void Rating::validate(const RatingScale& scale) const {
  if (!scale.contains(value)) {
    throw ValidationError("rating " + std::to_string(value) + " outside [" +
                          std::to_string(scale.min) + ", " + std::to_string(scale.max) + "]");
  }
  if ((scale.method == Method::CCR) != presentation_order.has_value()) {
    throw ValidationError("presentation order is required for CCR ratings only");
  }
}

void to_json(nlohmann::json& j, const RatingScale& s) {
  j = {{"method", to_string(s.method)}, {"min", s.min}, {"max", s.max}, {"labels", s.labels}};
}

void from_json(const nlohmann::json& j, RatingScale& s) {
  s.method = method_from_string(j.at("method").get<std::string>());
  s.min = j.at("min").get<int>();
  s.max = j.at("max").get<int>();
  s.labels = j.at("labels").get<std::vector<std::string>>();
}

void to_json(nlohmann::json& j, const Stimulus& s) {
  j = {{"id", s.id}, {"url", s.url}, {"role", to_string(s.role)}};
  put_optional(j, "condition", s.condition);
  put_optional(j, "expected_answer", s.expected_answer);
  put_optional(j, "tolerance", s.tolerance);
  put_optional(j, "reference_url", s.reference_url);
}

void from_json(const nlohmann::json& j, Stimulus& s) {
  s.id = j.at("id").get<std::string>();
  s.url = j.at("url").get<std::string>();
  s.role = role_from_string(j.at("role").get<std::string>());
  get_optional(j, "condition", s.condition);
  get_optional(j, "expected_answer", s.expected_answer);
  get_optional(j, "tolerance", s.tolerance);
  get_optional(j, "reference_url", s.reference_url);
}

void to_json(nlohmann::json& j, const Condition& c) {
  j = {{"label", c.label}, {"stimuli", c.stimuli}, {"is_reference", c.is_reference}};
}

void from_json(const nlohmann::json& j, Condition& c) {
  c.label = j.at("label").get<std::string>();
  c.stimuli = j.at("stimuli").get<std::vector<std::string>>();
  c.is_reference = j.value("is_reference", false);
}

void to_json(nlohmann::json& j, const Rating& r) {
  j = {{"stimulus_id", r.stimulus_id},
       {"worker_id", r.worker_id},
       {"session_id", r.session_id},
       {"value", r.value},
       {"timestamp", r.timestamp}};
  if (r.presentation_order) j["presentation_order"] = to_string(*r.presentation_order);
  put_optional(j, "condition", r.condition);
}

void from_json(const nlohmann::json& j, Rating& r) {
  r.stimulus_id = j.at("stimulus_id").get<std::string>();
  r.worker_id = j.at("worker_id").get<std::string>();
  r.session_id = j.at("session_id").get<std::string>();
  r.value = j.at("value").get<int>();
  r.timestamp = j.at("timestamp").get<Timestamp>();
  if (auto it = j.find("presentation_order"); it != j.end() && !it->is_null()) {
    r.presentation_order = order_from_string(it->get<std::string>());
  } else {
    r.presentation_order.reset();
  }
  get_optional(j, "condition", r.condition);
}

void to_json(nlohmann::json& j, const Certificate& c) {
  j = {{"kind", to_string(c.kind)},
       {"worker_id", c.worker_id},
       {"issued_at", c.issued_at},
       {"ttl_seconds", c.ttl_seconds},
       {"signature", c.signature}};
}

void from_json(const nlohmann::json& j, Certificate& c) {
  c.kind = certificate_kind_from_string(j.at("kind").get<std::string>());
  c.worker_id = j.at("worker_id").get<std::string>();
  c.issued_at = j.at("issued_at").get<Timestamp>();
  c.ttl_seconds = j.at("ttl_seconds").get<std::int64_t>();
  c.signature = j.at("signature").get<std::string>();
}

}  // namespace p808
