#include "p808/ingest.hpp"

#include <algorithm>
#include <set>

#include "p808/condition.hpp"
#include "p808/csv.hpp"
#include "p808/error.hpp"
#include "p808/numfmt.hpp"

namespace p808::ingest {

namespace {

bool paired(Method m) { return m != Method::ACR; }

std::string strip_platform_prefix(std::string name) {
  for (std::string_view prefix : {"Input.", "Answer."}) {
    if (name.rfind(prefix, 0) == 0) return name.substr(prefix.size());
  }
  return name;
}

std::string q(std::size_t i, std::string_view suffix) {
  return "q" + std::to_string(i) + "_" + std::string(suffix);
}

// Cell accessor that records row errors instead of throwing.
class RowReader {
 public:
  RowReader(const csv::Table& table, const std::vector<std::string>& row, std::size_t row_no,
            std::vector<RowError>& errors)
      : table_(table), row_(row), row_no_(row_no), errors_(errors) {}

  bool ok() const { return errors_.size() == first_error_; }

  bool has(const std::string& col) const { return table_.column(col).has_value(); }

  std::string text(const std::string& col) const {
    const auto c = table_.column(col);
    if (!c || *c >= row_.size()) return {};
    return row_[*c];
  }

  std::string required_text(const std::string& col) {
    auto v = text(col);
    if (v.empty()) fail(col, "empty value");
    return v;
  }

  int integer(const std::string& col) {
    const auto v = text(col);
    const auto x = parse_int(v);
    if (!x || *x < INT32_MIN || *x > INT32_MAX) {
      fail(col, v.empty() ? "missing integer" : "not an integer: '" + v + "'");
      return 0;
    }
    return static_cast<int>(*x);
  }

  Timestamp timestamp(const std::string& col) {
    const auto v = text(col);
    const auto x = parse_int(v);
    if (!x) {
      fail(col, "not a timestamp: '" + v + "'");
      return 0;
    }
    return *x;
  }

  std::optional<int> optional_integer(const std::string& col) {
    if (text(col).empty()) return std::nullopt;
    return integer(col);
  }

  bool boolean(const std::string& col) {
    const auto v = text(col);
    const auto b = parse_bool(v);
    if (!b) {
      fail(col, "not a boolean: '" + v + "'");
      return false;
    }
    return *b;
  }

  std::optional<bool> optional_boolean(const std::string& col) {
    if (text(col).empty()) return std::nullopt;
    return boolean(col);
  }

  std::optional<PresentationOrder> order(const std::string& col) {
    const auto v = text(col);
    if (v == "reference_first") return PresentationOrder::reference_first;
    if (v == "processed_first") return PresentationOrder::processed_first;
    fail(col, v.empty() ? "missing presentation order" : "invalid presentation order '" + v + "'");
    return std::nullopt;
  }

  void fail(const std::string& col, std::string message) {
    errors_.push_back({row_no_, col, std::move(message)});
  }

 private:
  const csv::Table& table_;
  const std::vector<std::string>& row_;
  std::size_t row_no_;
  std::vector<RowError>& errors_;
  std::size_t first_error_ = errors_.size();
};

ControlAnswer read_control(RowReader& r, const std::string& prefix, const RatingScale& scale,
                           int default_tolerance) {
  ControlAnswer c;
  c.stimulus_id = r.required_text(prefix + "_id");
  c.url = r.required_text(prefix + "_url");
  if (paired(scale.method)) {
    const auto ref = r.text(prefix + "_ref_url");
    if (!ref.empty()) c.reference_url = ref;
  }
  if (scale.method == Method::CCR && !r.text(prefix + "_order").empty()) {
    c.order = r.order(prefix + "_order");
  }
  c.expected = r.integer(prefix + "_expected");
  c.tolerance = prefix == "gold" ? r.optional_integer("gold_tolerance").value_or(default_tolerance) : 0;
  c.position = r.optional_integer(prefix + "_position").value_or(-1);
  c.answer = r.integer(prefix + "_answer");
  c.played = r.boolean(prefix + "_played");
  if (!scale.contains(c.answer)) {
    r.fail(prefix + "_answer", "answer " + std::to_string(c.answer) + " outside the scale");
  }
  if (!scale.contains(c.expected)) {
    r.fail(prefix + "_expected", "expected answer outside the scale");
  }
  return c;
}

}  // namespace

bool Submission::playback_complete() const {
  return trapping.played && gold.played &&
         std::all_of(clips.begin(), clips.end(), [](const ClipPlayback& c) { return c.played; });
}

nlohmann::json ParseReport::to_json() const {
  nlohmann::json errs = nlohmann::json::array();
  for (const auto& e : errors) {
    errs.push_back({{"row", e.row}, {"column", e.column}, {"message", e.message}});
  }
  std::set<std::size_t> bad_rows;
  for (const auto& e : errors) bad_rows.insert(e.row);
  return {{"rows", rows},
          {"parsed", rows - bad_rows.size()},
          {"rows_with_errors", bad_rows.size()},
          {"errors", errs}};
}

AnswerBatch parse_answer_batch(std::string_view csv_text, const ParseOptions& options) {
  auto table = csv::parse(csv_text);
  for (auto& h : table.header) h = strip_platform_prefix(h);
  const auto& scale = options.scale;
  const Method method = scale.method;

  std::size_t n = 0;
  while (table.column(q(n + 1, "rating"))) ++n;

  std::vector<std::string> mandatory{
      "assignment_id",   "worker_id",      "session_id",      "submit_time",
      "trapping_id",     "trapping_url",   "trapping_expected", "trapping_answer",
      "trapping_played", "gold_id",        "gold_url",        "gold_expected",
      "gold_answer",     "gold_played",    "earpods_answer",  "earpods_passed",
      "client_fingerprint"};
  if (n == 0) mandatory.push_back(q(1, "rating"));
  for (std::size_t i = 1; i <= n; ++i) {
    for (auto s : {"id", "url", "played"}) mandatory.push_back(q(i, s));
    if (paired(method)) mandatory.push_back(q(i, "ref_url"));
    if (method == Method::CCR) mandatory.push_back(q(i, "order"));
  }
  std::vector<std::string> missing;
  for (const auto& m : mandatory) {
    if (!table.column(m)) missing.push_back(m);
  }
  if (!missing.empty()) {
    throw ParseError("answer batch lacks mandatory columns: " + csv::join_list(missing, ','));
  }

  std::size_t env_pairs = 0;
  while (table.column("env_answer_" + std::to_string(env_pairs + 1))) ++env_pairs;

  std::optional<ConditionPattern> pattern;
  if (!options.condition_pattern.empty()) pattern.emplace(options.condition_pattern);

  AnswerBatch batch;
  batch.report.rows = table.rows.size();
  for (std::size_t row_index = 0; row_index < table.rows.size(); ++row_index) {
    const auto& row = table.rows[row_index];
    RowReader r(table, row, row_index + 1, batch.report.errors);
    if (row.size() != table.header.size()) {
      r.fail("", "row has " + std::to_string(row.size()) + " cells, header has " +
                     std::to_string(table.header.size()));
      continue;
    }

    Submission sub;
    sub.assignment_id = r.required_text("assignment_id");
    sub.worker_id = r.required_text("worker_id");
    sub.session_id = r.required_text("session_id");
    sub.submit_time = r.timestamp("submit_time");

    for (std::size_t i = 1; i <= n; ++i) {
      Rating rating;
      rating.stimulus_id = r.required_text(q(i, "id"));
      rating.worker_id = sub.worker_id;
      rating.session_id = sub.session_id;
      rating.timestamp = sub.submit_time;
      rating.value = r.integer(q(i, "rating"));
      if (!scale.contains(rating.value)) {
        r.fail(q(i, "rating"), "rating " + std::to_string(rating.value) + " outside [" +
                                   std::to_string(scale.min) + ", " + std::to_string(scale.max) + "]");
      }
      if (method == Method::CCR) rating.presentation_order = r.order(q(i, "order"));

      ClipPlayback clip;
      clip.url = r.required_text(q(i, "url"));
      if (paired(method)) clip.reference_url = r.required_text(q(i, "ref_url"));
      clip.played = r.boolean(q(i, "played"));
      if (pattern) rating.condition = pattern->match(clip.url);

      sub.ratings.push_back(std::move(rating));
      sub.clips.push_back(std::move(clip));
    }

    sub.trapping = read_control(r, "trapping", scale, options.default_gold_tolerance);
    sub.gold = read_control(r, "gold", scale, options.default_gold_tolerance);
    sub.earpods.answer = r.integer("earpods_answer");
    sub.earpods.passed = r.boolean("earpods_passed");

    if (env_pairs > 0 && !r.text("env_answer_1").empty()) {
      EnvironmentTest env;
      for (std::size_t k = 1; k <= env_pairs; ++k) {
        const auto col = "env_answer_" + std::to_string(k);
        const int a = r.integer(col);
        if (a != 1 && a != 2) r.fail(col, "environment answer must be 1 or 2");
        env.answers.push_back(a);
      }
      env.passed = r.boolean("env_passed");
      sub.env_test = std::move(env);
    }

    if (!r.text("qual_hearing_passed").empty() || !r.text("qual_language_passed").empty()) {
      QualificationRecord qual;
      qual.hearing_passed = r.boolean("qual_hearing_passed");
      qual.language_passed = r.boolean("qual_language_passed");
      qual.device_type = r.text("qual_device_type");
      sub.qualification = std::move(qual);
    }

    sub.certificates = csv::split_list(r.text("certificates"));
    sub.detected_devices = csv::split_list(r.text("detected_devices"));
    sub.client_fingerprint = r.required_text("client_fingerprint");

    if (r.ok()) batch.submissions.push_back(std::move(sub));
  }
  return batch;
}

std::string write_answer_batch(const std::vector<Submission>& submissions, Method method,
                               int env_pairs) {
  std::size_t n = 0;
  for (const auto& s : submissions) n = std::max(n, s.ratings.size());

  csv::Table t;
  t.header = {"assignment_id", "worker_id", "session_id", "submit_time"};
  for (std::size_t i = 1; i <= n; ++i) {
    t.header.push_back(q(i, "id"));
    t.header.push_back(q(i, "url"));
    if (paired(method)) t.header.push_back(q(i, "ref_url"));
    if (method == Method::CCR) t.header.push_back(q(i, "order"));
    t.header.push_back(q(i, "rating"));
    t.header.push_back(q(i, "played"));
  }
  auto control_header = [&](const std::string& p) {
    t.header.push_back(p + "_id");
    t.header.push_back(p + "_url");
    if (paired(method)) t.header.push_back(p + "_ref_url");
    if (method == Method::CCR) t.header.push_back(p + "_order");
    t.header.push_back(p + "_expected");
    if (p == "gold") t.header.push_back("gold_tolerance");
    t.header.push_back(p + "_position");
    t.header.push_back(p + "_answer");
    t.header.push_back(p + "_played");
  };
  control_header("trapping");
  control_header("gold");
  t.header.insert(t.header.end(), {"earpods_answer", "earpods_passed"});
  for (int k = 1; k <= env_pairs; ++k) t.header.push_back("env_answer_" + std::to_string(k));
  t.header.insert(t.header.end(),
                  {"env_passed", "qual_hearing_passed", "qual_language_passed", "qual_device_type",
                   "certificates", "detected_devices", "client_fingerprint"});

  auto flag = [](bool b) { return std::string(b ? "1" : "0"); };
  for (const auto& s : submissions) {
    std::vector<std::string> row{s.assignment_id, s.worker_id, s.session_id,
                                 std::to_string(s.submit_time)};
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= s.ratings.size()) {
        row.insert(row.end(), paired(method) ? (method == Method::CCR ? 6 : 5) : 4, "");
        continue;
      }
      const auto& r = s.ratings[i];
      const auto& c = s.clips.at(i);
      row.push_back(r.stimulus_id);
      row.push_back(c.url);
      if (paired(method)) row.push_back(c.reference_url.value_or(""));
      if (method == Method::CCR) {
        row.emplace_back(r.presentation_order ? to_string(*r.presentation_order) : "");
      }
      row.push_back(std::to_string(r.value));
      row.push_back(flag(c.played));
    }
    auto control = [&](const ControlAnswer& c, bool gold) {
      row.push_back(c.stimulus_id);
      row.push_back(c.url);
      if (paired(method)) row.push_back(c.reference_url.value_or(""));
      if (method == Method::CCR) row.emplace_back(c.order ? to_string(*c.order) : "");
      row.push_back(std::to_string(c.expected));
      if (gold) row.push_back(std::to_string(c.tolerance));
      row.push_back(std::to_string(c.position));
      row.push_back(std::to_string(c.answer));
      row.push_back(flag(c.played));
    };
    control(s.trapping, false);
    control(s.gold, true);
    row.push_back(std::to_string(s.earpods.answer));
    row.push_back(flag(s.earpods.passed));
    for (int k = 0; k < env_pairs; ++k) {
      if (s.env_test && static_cast<std::size_t>(k) < s.env_test->answers.size()) {
        row.push_back(std::to_string(s.env_test->answers[static_cast<std::size_t>(k)]));
      } else {
        row.emplace_back();
      }
    }
    row.push_back(s.env_test ? flag(s.env_test->passed) : "");
    if (s.qualification) {
      row.push_back(flag(s.qualification->hearing_passed));
      row.push_back(flag(s.qualification->language_passed));
      row.push_back(s.qualification->device_type);
    } else {
      row.insert(row.end(), 3, "");
    }
    row.push_back(csv::join_list(s.certificates));
    row.push_back(csv::join_list(s.detected_devices));
    row.push_back(s.client_fingerprint);
    t.rows.push_back(std::move(row));
  }
  return csv::write(t);
}

std::string_view to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::duplicate_qualification: return "duplicate_qualification";
    case AnomalyKind::duplicate_session: return "duplicate_session";
    case AnomalyKind::repeated_stimulus: return "repeated_stimulus";
    case AnomalyKind::fingerprint_mismatch: return "fingerprint_mismatch";
  }
  return "?";
}

const QualificationRecord* WorkerHistory::qualification() const {
  if (!qualification_index) return nullptr;
  const auto& q = submissions[*qualification_index].qualification;
  return q ? &*q : nullptr;
}

bool WorkerHistory::flagged(std::string_view assignment_id, AnomalyKind kind) const {
  return std::any_of(anomalies.begin(), anomalies.end(), [&](const Anomaly& a) {
    return a.kind == kind && a.assignment_id == assignment_id;
  });
}

Histories reconstruct_sessions(const std::vector<Submission>& submissions) {
  Histories out;
  for (const auto& s : submissions) {
    auto& h = out[s.worker_id];
    h.worker_id = s.worker_id;
    h.submissions.push_back(s);
  }
  for (auto& [worker, h] : out) {
    std::stable_sort(h.submissions.begin(), h.submissions.end(),
                     [](const Submission& a, const Submission& b) {
                       if (a.submit_time != b.submit_time) return a.submit_time < b.submit_time;
                       return a.assignment_id < b.assignment_id;
                     });
    std::set<std::string> sessions;
    std::set<std::string> tokens;
    std::map<std::string, std::vector<std::string>> rated;  // stimulus id -> sessions, in order
    const std::string& fingerprint = h.submissions.front().client_fingerprint;
    for (std::size_t i = 0; i < h.submissions.size(); ++i) {
      const auto& s = h.submissions[i];
      if (s.qualification) {
        if (!h.qualification_index) {
          h.qualification_index = i;
        } else {
          h.anomalies.push_back({AnomalyKind::duplicate_qualification, s.assignment_id,
                                 "qualification section answered again"});
        }
      }
      if (!sessions.insert(s.session_id).second) {
        h.anomalies.push_back({AnomalyKind::duplicate_session, s.assignment_id,
                               "session " + s.session_id + " submitted more than once"});
      }
      if (s.client_fingerprint != fingerprint) {
        h.anomalies.push_back({AnomalyKind::fingerprint_mismatch, s.assignment_id,
                               "client fingerprint differs from the worker's first submission"});
      }
      for (const auto& r : s.ratings) {
        auto& seen = rated[r.stimulus_id];
        const auto other = std::find_if(seen.begin(), seen.end(),
                                        [&](const std::string& id) { return id != s.session_id; });
        if (other != seen.end()) {
          h.anomalies.push_back({AnomalyKind::repeated_stimulus, s.assignment_id,
                                 "stimulus " + r.stimulus_id + " already rated in session " + *other});
        }
        seen.push_back(s.session_id);
      }
      for (const auto& t : s.certificates) {
        if (tokens.insert(t).second) h.certificate_chain.push_back(t);
      }
    }
  }
  return out;
}

}  // namespace p808::ingest
