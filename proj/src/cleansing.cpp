#include "p808/cleansing.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "p808/certificate.hpp"
#include "p808/csv.hpp"
#include "p808/error.hpp"
#include "p808/numfmt.hpp"

namespace p808::cleansing {

namespace {

constexpr std::array<std::string_view, kAllCriteria.size()> kCriterionNames{
    "playback", "earpods",       "trapping",
    "environment", "gold",       "variance",
    "qualification", "certificate_integrity", "headset"};

bool toggle(const FilterToggles& f, Criterion c) {
  switch (c) {
    case Criterion::playback: return f.playback;
    case Criterion::earpods: return f.earpods;
    case Criterion::trapping: return f.trapping;
    case Criterion::environment: return f.environment;
    case Criterion::gold: return f.gold;
    case Criterion::variance: return f.variance;
    case Criterion::qualification: return f.qualification;
    case Criterion::certificate_integrity: return f.certificate_integrity;
    case Criterion::headset: return f.headset;
  }
  return false;
}

constexpr std::array<Criterion, 3> kAcceptance{Criterion::playback, Criterion::earpods,
                                               Criterion::trapping};
constexpr std::array<Criterion, 6> kUsability{Criterion::environment, Criterion::gold,
                                              Criterion::variance, Criterion::qualification,
                                              Criterion::certificate_integrity, Criterion::headset};

Flag flag(bool ok) { return ok ? Flag::pass : Flag::fail; }

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool trapping_correct(const ingest::ControlAnswer& t, const ExperimentConfig& config) {
  if (config.method != Method::CCR) return t.answer == t.expected;
  const int offset = t.answer - t.expected;
  return std::find(config.ccr_trapping_accept.begin(), config.ccr_trapping_accept.end(), offset) !=
         config.ccr_trapping_accept.end();
}

Flag environment_flag(const ingest::Submission& sub, const ExperimentConfig& config,
                      const std::string& secret) {
  if (!config.environment.enabled) return Flag::not_applicable;
  for (const auto& token : sub.certificates) {
    const auto check = verify_certificate(token, secret, sub.worker_id, sub.submit_time);
    if (check.valid && check.certificate->kind == CertificateKind::environment) return Flag::pass;
  }
  if (!sub.env_test) return Flag::fail;
  const auto& key = config.environment.pairs;
  if (key.size() != sub.env_test->answers.size()) return flag(sub.env_test->passed);
  int correct = 0;
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (sub.env_test->answers[i] == key[i].better) ++correct;
  }
  return flag(correct >= config.environment.min_correct);
}

Flag variance_flag(const std::vector<Rating>& ratings, const VarianceSettings& v) {
  if (ratings.empty()) return Flag::fail;
  std::set<int> distinct;
  for (const auto& r : ratings) distinct.insert(r.value);
  if (static_cast<int>(distinct.size()) < v.min_distinct) return Flag::fail;
  if (v.min_sd > 0) {
    if (ratings.size() < 2) return Flag::fail;
    double mean = 0;
    for (const auto& r : ratings) mean += r.value;
    mean /= static_cast<double>(ratings.size());
    double ss = 0;
    for (const auto& r : ratings) ss += (r.value - mean) * (r.value - mean);
    if (std::sqrt(ss / static_cast<double>(ratings.size() - 1)) < v.min_sd) return Flag::fail;
  }
  return Flag::pass;
}

Flag integrity_flag(const ingest::Submission& sub, const ingest::WorkerHistory* history,
                    const std::string& secret) {
  for (const auto& token : sub.certificates) {
    const auto check = verify_certificate(token, secret, sub.worker_id, sub.submit_time);
    if (!check.valid && check.reason != "expired") return Flag::fail;
  }
  if (history && (history->flagged(sub.assignment_id, ingest::AnomalyKind::duplicate_qualification) ||
                  history->flagged(sub.assignment_id, ingest::AnomalyKind::fingerprint_mismatch))) {
    return Flag::fail;
  }
  return Flag::pass;
}

std::string yes_no(bool b) { return b ? "1" : "0"; }

}  // namespace

std::string_view to_string(Criterion c) { return kCriterionNames[static_cast<std::size_t>(c)]; }

Criterion criterion_from_string(std::string_view s) {
  for (auto c : kAllCriteria) {
    if (to_string(c) == s) return c;
  }
  throw ValidationError("unknown criterion '" + std::string(s) + "'");
}

std::string_view to_string(Flag f) {
  switch (f) {
    case Flag::pass: return "pass";
    case Flag::fail: return "fail";
    case Flag::not_applicable: return "n/a";
  }
  return "?";
}

Flag flag_from_string(std::string_view s) {
  if (s == "pass") return Flag::pass;
  if (s == "fail") return Flag::fail;
  if (s == "n/a") return Flag::not_applicable;
  throw ValidationError("unknown flag '" + std::string(s) + "'");
}

std::vector<Criterion> CriterionFlags::failed() const {
  std::vector<Criterion> out;
  for (auto c : kAllCriteria) {
    if ((*this)[c] == Flag::fail) out.push_back(c);
  }
  return out;
}

bool accepted_from(const CriterionFlags& flags, const FilterToggles& filters) {
  return std::all_of(kAcceptance.begin(), kAcceptance.end(),
                     [&](Criterion c) { return !toggle(filters, c) || flags.passes(c); });
}

bool usable_from(const CriterionFlags& flags, const FilterToggles& filters) {
  return accepted_from(flags, filters) &&
         std::all_of(kUsability.begin(), kUsability.end(),
                     [&](Criterion c) { return !toggle(filters, c) || flags.passes(c); });
}

AcceptanceResult check_acceptance(const ingest::Submission& sub, const ExperimentConfig& config) {
  AcceptanceResult out;
  out.flags.set(Criterion::playback, flag(sub.playback_complete()));
  const bool earpods = config.earpods_answer ? sub.earpods.answer == *config.earpods_answer
                                             : sub.earpods.passed;
  out.flags.set(Criterion::earpods, flag(earpods));
  out.flags.set(Criterion::trapping, flag(trapping_correct(sub.trapping, config)));
  out.accepted = accepted_from(out.flags, config.filters);
  return out;
}

UsabilityResult check_usability(const ingest::Submission& sub, const ingest::WorkerHistory* history,
                                const ExperimentConfig& config, const std::string& secret) {
  const auto acceptance = check_acceptance(sub, config);
  UsabilityResult out;
  out.flags = acceptance.flags;
  out.flags.set(Criterion::environment, environment_flag(sub, config, secret));
  out.flags.set(Criterion::gold,
                flag(std::abs(sub.gold.answer - sub.gold.expected) <= sub.gold.tolerance));
  out.flags.set(Criterion::variance, variance_flag(sub.ratings, config.variance));
  const auto* qual = history ? history->qualification() : nullptr;
  out.flags.set(Criterion::qualification, flag(qual != nullptr && qual->passed()));
  out.flags.set(Criterion::certificate_integrity, integrity_flag(sub, history, secret));
  out.flags.set(Criterion::headset,
                sub.detected_devices.empty()
                    ? Flag::not_applicable
                    : flag(headset_detected(sub.detected_devices, config.headset_keywords)));
  out.usable = acceptance.accepted && usable_from(out.flags, config.filters);
  return out;
}

CertificateCheck verify_certificate(std::string_view token, const std::string& secret,
                                    std::string_view expected_worker, Timestamp now) {
  CertificateCheck out;
  out.certificate = decode_token(token);
  if (!out.certificate) {
    out.reason = "malformed";
    return out;
  }
  const auto& cert = *out.certificate;
  if (!signature_matches(cert, derive_client_key(secret))) {
    out.reason = "bad signature";
  } else if (cert.worker_id != expected_worker) {
    out.reason = "worker mismatch";
  } else if (cert.issued_at > now) {
    out.reason = "issued in future";
  } else if (cert.kind == CertificateKind::environment &&
             (!cert.expires() || now >= cert.expires_at())) {
    out.reason = "expired";
  } else {
    out.valid = true;
    out.reason = "ok";
  }
  return out;
}

bool headset_detected(const std::vector<std::string>& device_names,
                      const std::vector<std::string>& keywords) {
  for (const auto& name : device_names) {
    const auto n = lower(name);
    for (const auto& k : keywords) {
      if (!k.empty() && n.find(lower(k)) != std::string::npos) return true;
    }
  }
  return false;
}

nlohmann::json CleansingReport::to_json() const {
  nlohmann::json fails = nlohmann::json::object();
  for (auto c : kAllCriteria) fails[std::string(to_string(c))] = fail_counts[static_cast<std::size_t>(c)];
  return {{"submissions", submissions},
          {"accepted", accepted},
          {"rejected", rejected},
          {"usable", usable},
          {"usable_ratings", usable_ratings},
          {"approval_rate", approval_rate},
          {"usable_rate", usable_rate},
          {"fail_counts", fails}};
}

ScreeningResult screen_batch(const std::vector<ingest::Submission>& subs,
                             const ingest::Histories& histories, const ExperimentConfig& config,
                             const std::string& secret) {
  std::vector<const ingest::Submission*> ordered;
  ordered.reserve(subs.size());
  for (const auto& s : subs) ordered.push_back(&s);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->assignment_id < b->assignment_id; });

  ScreeningResult out;
  for (const auto* sub : ordered) {
    const auto it = histories.find(sub->worker_id);
    const auto* history = it == histories.end() ? nullptr : &it->second;
    const auto usability = check_usability(*sub, history, config, secret);

    CleansingVerdict v;
    v.assignment_id = sub->assignment_id;
    v.worker_id = sub->worker_id;
    v.criteria = usability.flags;
    v.accepted = accepted_from(v.criteria, config.filters);
    v.ratings_usable = usability.usable;
    v.bonus_due = v.accepted && !sub->ratings.empty() &&
                  (!config.bonus.require_usable || v.ratings_usable);

    auto& rep = out.report;
    ++rep.submissions;
    for (auto c : v.criteria.failed()) ++rep.fail_counts[static_cast<std::size_t>(c)];
    if (v.accepted) {
      ++rep.accepted;
      out.approved.push_back(v.assignment_id);
    } else {
      ++rep.rejected;
      out.rejected.push_back({v.assignment_id, v.worker_id, rejection_reason(v)});
    }
    if (v.ratings_usable) {
      ++rep.usable;
      out.usable_ratings.insert(out.usable_ratings.end(), sub->ratings.begin(), sub->ratings.end());
    }
    if (v.bonus_due && config.bonus.amount_minor > 0) {
      out.bonuses.push_back({v.assignment_id, v.worker_id, config.bonus.amount_minor});
    }
    out.verdicts.push_back(std::move(v));
  }
  auto& rep = out.report;
  rep.usable_ratings = out.usable_ratings.size();
  if (rep.submissions > 0) {
    rep.approval_rate = static_cast<double>(rep.accepted) / static_cast<double>(rep.submissions);
    rep.usable_rate = static_cast<double>(rep.usable) / static_cast<double>(rep.submissions);
  }
  return out;
}

std::string rejection_reason(const CleansingVerdict& verdict) {
  std::vector<std::string> failed;
  for (auto c : kAcceptance) {
    if (verdict.criteria[c] == Flag::fail) failed.emplace_back(to_string(c));
  }
  if (failed.empty()) return "Submission rejected.";
  return "Submission rejected: failed " + csv::join_list(failed, ',') + " check" +
         (failed.size() > 1 ? "s." : ".");
}

CriterionSplit split_by_criterion(const std::vector<CleansingVerdict>& verdicts, Criterion criterion) {
  CriterionSplit out;
  for (const auto& v : verdicts) {
    if (!v.accepted) continue;
    (v.criteria[criterion] == Flag::fail ? out.failed : out.passed).push_back(v.assignment_id);
  }
  return out;
}

std::string verdicts_csv(const std::vector<CleansingVerdict>& verdicts) {
  csv::Table t;
  t.header = {"assignment_id", "worker_id", "accepted", "ratings_usable", "bonus_due"};
  for (auto c : kAllCriteria) t.header.emplace_back(to_string(c));
  for (const auto& v : verdicts) {
    std::vector<std::string> row{v.assignment_id, v.worker_id, yes_no(v.accepted),
                                 yes_no(v.ratings_usable), yes_no(v.bonus_due)};
    for (auto c : kAllCriteria) row.emplace_back(to_string(v.criteria[c]));
    t.rows.push_back(std::move(row));
  }
  return csv::write(t);
}

std::vector<CleansingVerdict> parse_verdicts_csv(std::string_view text) {
  const auto t = csv::parse(text);
  auto col = [&](std::string_view name) {
    const auto c = t.column(name);
    if (!c) throw ParseError("verdicts lack column '" + std::string(name) + "'");
    return *c;
  };
  auto boolean = [](const std::string& v) {
    const auto b = parse_bool(v);
    if (!b) throw ParseError("invalid boolean '" + v + "' in verdicts");
    return *b;
  };
  std::vector<CleansingVerdict> out;
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) throw ParseError("ragged verdict row");
    CleansingVerdict v;
    v.assignment_id = row[col("assignment_id")];
    v.worker_id = row[col("worker_id")];
    v.accepted = boolean(row[col("accepted")]);
    v.ratings_usable = boolean(row[col("ratings_usable")]);
    v.bonus_due = boolean(row[col("bonus_due")]);
    for (auto c : kAllCriteria) {
      try {
        v.criteria.set(c, flag_from_string(row[col(to_string(c))]));
      } catch (const ValidationError& e) {
        throw ParseError(e.what());
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::string ratings_csv(const std::vector<Rating>& ratings) {
  csv::Table t;
  t.header = {"stimulus_id", "condition", "worker_id", "session_id", "value", "presentation_order",
              "timestamp"};
  for (const auto& r : ratings) {
    t.rows.push_back({r.stimulus_id, r.condition.value_or(""), r.worker_id, r.session_id,
                      std::to_string(r.value),
                      r.presentation_order ? std::string(to_string(*r.presentation_order)) : "",
                      std::to_string(r.timestamp)});
  }
  return csv::write(t);
}

std::vector<Rating> parse_ratings_csv(std::string_view text) {
  const auto t = csv::parse(text);
  auto col = [&](std::string_view name) {
    const auto c = t.column(name);
    if (!c) throw ParseError("ratings lack column '" + std::string(name) + "'");
    return *c;
  };
  const auto condition_col = t.column("condition");
  const auto order_col = t.column("presentation_order");
  const auto time_col = t.column("timestamp");
  std::vector<Rating> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    if (row.size() != t.header.size()) throw ParseError("ragged ratings row " + std::to_string(i + 1));
    Rating r;
    r.stimulus_id = row[col("stimulus_id")];
    r.worker_id = row[col("worker_id")];
    r.session_id = row[col("session_id")];
    const auto value = parse_int(row[col("value")]);
    if (!value) throw ParseError("invalid rating value in row " + std::to_string(i + 1));
    r.value = static_cast<int>(*value);
    if (condition_col && !row[*condition_col].empty()) r.condition = row[*condition_col];
    if (order_col && !row[*order_col].empty()) {
      try {
        r.presentation_order = order_from_string(row[*order_col]);
      } catch (const ValidationError& e) {
        throw ParseError(e.what());
      }
    }
    if (time_col) r.timestamp = parse_int(row[*time_col]).value_or(0);
    out.push_back(std::move(r));
  }
  return out;
}

std::string approve_csv(const ScreeningResult& result) {
  csv::Table t;
  t.header = {"assignment_id"};
  for (const auto& a : result.approved) t.rows.push_back({a});
  return csv::write(t);
}

std::string reject_csv(const ScreeningResult& result) {
  csv::Table t;
  t.header = {"assignment_id", "worker_id", "reason"};
  for (const auto& r : result.rejected) t.rows.push_back({r.assignment_id, r.worker_id, r.reason});
  return csv::write(t);
}

std::string bonus_csv(const ScreeningResult& result, const std::string& currency) {
  csv::Table t;
  t.header = {"worker_id", "assignment_id", "amount_minor", "currency"};
  for (const auto& b : result.bonuses) {
    t.rows.push_back({b.worker_id, b.assignment_id, std::to_string(b.amount_minor), currency});
  }
  return csv::write(t);
}

}  // namespace p808::cleansing
