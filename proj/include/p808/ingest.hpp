#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "p808/types.hpp"

namespace p808::ingest {

// Trapping or gold question as answered. `expected`/`tolerance` echo the
// platform input row, `answer` is the worker's choice.
struct ControlAnswer {
  std::string stimulus_id;
  std::string url;
  std::optional<std::string> reference_url;
  std::optional<PresentationOrder> order;
  int expected = 0;
  int tolerance = 0;
  int position = 0;
  int answer = 0;
  bool played = false;

  friend bool operator==(const ControlAnswer&, const ControlAnswer&) = default;
};

// Per rated clip: where it came from and whether it was fully played.
struct ClipPlayback {
  std::string url;
  std::optional<std::string> reference_url;
  bool played = false;

  friend bool operator==(const ClipPlayback&, const ClipPlayback&) = default;
};

struct EarpodsCheck {
  int answer = 0;
  bool passed = false;

  friend bool operator==(const EarpodsCheck&, const EarpodsCheck&) = default;
};

// Answers to the environment pairs; each answer is 1 or 2 (the better clip).
struct EnvironmentTest {
  std::vector<int> answers;
  bool passed = false;

  friend bool operator==(const EnvironmentTest&, const EnvironmentTest&) = default;
};

struct QualificationRecord {
  bool hearing_passed = false;
  bool language_passed = false;
  std::string device_type;

  bool passed() const { return hearing_passed && language_passed; }

  friend bool operator==(const QualificationRecord&, const QualificationRecord&) = default;
};

struct Submission {
  std::string assignment_id;
  std::string worker_id;
  std::string session_id;
  std::vector<Rating> ratings;
  std::vector<ClipPlayback> clips;  // parallel to ratings
  ControlAnswer trapping;
  ControlAnswer gold;
  EarpodsCheck earpods;
  std::optional<EnvironmentTest> env_test;
  std::optional<QualificationRecord> qualification;
  std::vector<std::string> certificates;  // encoded tokens
  std::vector<std::string> detected_devices;
  std::string client_fingerprint;
  Timestamp submit_time = 0;

  // Every rated clip and both control clips were fully played.
  bool playback_complete() const;

  friend bool operator==(const Submission&, const Submission&) = default;
};

struct RowError {
  std::size_t row = 0;  // 1-based data row; the header is row 0
  std::string column;
  std::string message;
};

struct ParseReport {
  std::size_t rows = 0;
  std::vector<RowError> errors;

  nlohmann::json to_json() const;
};

struct AnswerBatch {
  std::vector<Submission> submissions;
  ParseReport report;
};

struct ParseOptions {
  RatingScale scale = RatingScale::for_method(Method::ACR);
  std::string condition_pattern;
  int default_gold_tolerance = 1;
};

// Header names may carry the platform's "Input."/"Answer." prefixes.
// Throws ParseError when mandatory columns are missing; malformed cells become
// row errors and the row is left out of the submissions.
AnswerBatch parse_answer_batch(std::string_view csv_text, const ParseOptions& options);

// Serializes submissions in the answer schema. `env_pairs` fixes the number of
// env_answer_* columns.
std::string write_answer_batch(const std::vector<Submission>& submissions, Method method,
                               int env_pairs = 4);

enum class AnomalyKind { duplicate_qualification, duplicate_session, repeated_stimulus, fingerprint_mismatch };

std::string_view to_string(AnomalyKind k);

struct Anomaly {
  AnomalyKind kind;
  std::string assignment_id;
  std::string detail;
};

struct WorkerHistory {
  std::string worker_id;
  std::vector<Submission> submissions;  // ordered by submit_time, then assignment_id
  std::optional<std::size_t> qualification_index;  // first submission carrying the section
  std::vector<std::string> certificate_chain;       // distinct tokens in order of first use
  std::vector<Anomaly> anomalies;

  const QualificationRecord* qualification() const;
  bool flagged(std::string_view assignment_id, AnomalyKind kind) const;
};

using Histories = std::map<std::string, WorkerHistory>;

// Groups submissions per worker and flags anomalies; never throws on odd data.
Histories reconstruct_sessions(const std::vector<Submission>& submissions);

}  // namespace p808::ingest
