#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "p808/config.hpp"
#include "p808/ingest.hpp"
#include "p808/types.hpp"

namespace p808::cleansing {

enum class Criterion {
  playback,
  earpods,
  trapping,
  environment,
  gold,
  variance,
  qualification,
  certificate_integrity,
  headset,
};

inline constexpr std::array<Criterion, 9> kAllCriteria{
    Criterion::playback,      Criterion::earpods,     Criterion::trapping,
    Criterion::environment,   Criterion::gold,        Criterion::variance,
    Criterion::qualification, Criterion::certificate_integrity, Criterion::headset};

std::string_view to_string(Criterion c);
// Throws ValidationError for an unknown name.
Criterion criterion_from_string(std::string_view s);

enum class Flag { pass, fail, not_applicable };

std::string_view to_string(Flag f);
Flag flag_from_string(std::string_view s);

// Per-criterion outcome. Every flag is computed regardless of the filter
// toggles; the toggles only decide which flags feed acceptance and usability.
// not_applicable never blocks.
class CriterionFlags {
 public:
  CriterionFlags() { values_.fill(Flag::not_applicable); }

  Flag operator[](Criterion c) const { return values_[static_cast<std::size_t>(c)]; }
  void set(Criterion c, Flag f) { values_[static_cast<std::size_t>(c)] = f; }
  bool passes(Criterion c) const { return (*this)[c] != Flag::fail; }
  std::vector<Criterion> failed() const;

  friend bool operator==(const CriterionFlags&, const CriterionFlags&) = default;

 private:
  std::array<Flag, kAllCriteria.size()> values_{};
};

// accepted = playback and earpods and trapping (enabled filters only).
bool accepted_from(const CriterionFlags& flags, const FilterToggles& filters);
// usable = accepted and environment, gold, variance, qualification and
// certificate_integrity (plus headset when that filter is switched on).
bool usable_from(const CriterionFlags& flags, const FilterToggles& filters);

struct CleansingVerdict {
  std::string assignment_id;
  std::string worker_id;
  bool accepted = false;
  bool ratings_usable = false;
  CriterionFlags criteria;
  bool bonus_due = false;

  friend bool operator==(const CleansingVerdict&, const CleansingVerdict&) = default;
};

struct AcceptanceResult {
  bool accepted = false;
  CriterionFlags flags;  // playback, earpods and trapping only
};

AcceptanceResult check_acceptance(const ingest::Submission& sub, const ExperimentConfig& config);

struct UsabilityResult {
  bool usable = false;
  CriterionFlags flags;  // all criteria
};

// `history` may be null (unknown worker), in which case qualification fails.
UsabilityResult check_usability(const ingest::Submission& sub, const ingest::WorkerHistory* history,
                                const ExperimentConfig& config, const std::string& secret);

struct CertificateCheck {
  bool valid = false;
  std::string reason;  // "ok", "malformed", "bad signature", "expired", "worker mismatch", "issued in future"
  std::optional<Certificate> certificate;
};

// Qualification certificates never expire; environment certificates expire at
// issued_at + ttl (exclusive).
CertificateCheck verify_certificate(std::string_view token, const std::string& secret,
                                    std::string_view expected_worker, Timestamp now);

// Case-insensitive keyword match over device names.
bool headset_detected(const std::vector<std::string>& device_names,
                      const std::vector<std::string>& keywords);

struct CleansingReport {
  std::size_t submissions = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t usable = 0;
  std::size_t usable_ratings = 0;
  double approval_rate = 0.0;
  double usable_rate = 0.0;
  std::array<std::size_t, kAllCriteria.size()> fail_counts{};

  nlohmann::json to_json() const;
};

struct RejectedSubmission {
  std::string assignment_id;
  std::string worker_id;
  std::string reason;
};

struct BonusEntry {
  std::string assignment_id;
  std::string worker_id;
  std::int64_t amount_minor = 0;
};

struct ScreeningResult {
  std::vector<CleansingVerdict> verdicts;  // ordered by assignment_id
  std::vector<Rating> usable_ratings;
  CleansingReport report;
  std::vector<std::string> approved;  // assignment ids
  std::vector<RejectedSubmission> rejected;
  std::vector<BonusEntry> bonuses;
};

ScreeningResult screen_batch(const std::vector<ingest::Submission>& subs,
                             const ingest::Histories& histories, const ExperimentConfig& config,
                             const std::string& secret);

// Human-readable reason listing the failed acceptance criteria.
std::string rejection_reason(const CleansingVerdict& verdict);

struct CriterionSplit {
  std::vector<std::string> passed;  // assignment ids
  std::vector<std::string> failed;
};

// Partitions the accepted verdicts by one criterion: flag fail goes to `failed`,
// pass and not_applicable to `passed`.
CriterionSplit split_by_criterion(const std::vector<CleansingVerdict>& verdicts, Criterion criterion);

// Report writers (CSV text / JSON).
std::string verdicts_csv(const std::vector<CleansingVerdict>& verdicts);
std::vector<CleansingVerdict> parse_verdicts_csv(std::string_view text);
std::string ratings_csv(const std::vector<Rating>& ratings);
std::vector<Rating> parse_ratings_csv(std::string_view text);
std::string approve_csv(const ScreeningResult& result);
std::string reject_csv(const ScreeningResult& result);
std::string bonus_csv(const ScreeningResult& result, const std::string& currency);

}  // namespace p808::cleansing
