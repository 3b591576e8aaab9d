#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "p808/config.hpp"
#include "p808/csv.hpp"
#include "p808/types.hpp"
#include "p808/wav.hpp"

namespace p808::builder {

enum class ItemKind { rating, trapping, gold };

// One question of a session as the worker sees it.
struct SessionItem {
  ItemKind kind = ItemKind::rating;
  const Stimulus* stimulus = nullptr;
  std::optional<PresentationOrder> order;
};

struct SessionSpec {
  std::string session_id;
  std::vector<Stimulus> rating_stimuli;
  // CCR only: presentation order per rating stimulus (parallel to rating_stimuli).
  std::vector<PresentationOrder> orders;
  Stimulus trapping;
  std::optional<PresentationOrder> trapping_order;
  Stimulus gold;
  std::optional<PresentationOrder> gold_order;
  // 0-based positions among the item_count() questions.
  int trapping_position = 0;
  int gold_position = 1;
  std::string training_ref;
  std::uint64_t randomization_seed = 0;

  std::size_t item_count() const { return rating_stimuli.size() + 2; }
  std::vector<SessionItem> presentation() const;

  friend bool operator==(const SessionSpec&, const SessionSpec&) = default;
};

struct TestPlan {
  std::vector<SessionSpec> sessions;
  int votes_target = 5;
  double safety_factor = 1.0;
  RatingScale scale;
  std::string condition_pattern;
  std::uint64_t seed = 0;
  std::string checksum;  // SHA-256 over the canonical JSON without this field

  // Minimum number of sessions each rating stimulus is placed in.
  int coverage_target() const;

  friend bool operator==(const TestPlan&, const TestPlan&) = default;
};

int coverage_target(int votes_target, double safety_factor);

// Reads the clip list CSV: column `url` (alias `rating_clips`), optional
// `reference_url` (alias `references`) and `id`. Conditions come from the
// configured pattern.
std::vector<Stimulus> load_clip_list(std::string_view csv_text, const ExperimentConfig& config);

// Seeded greedy assignment: every session takes the least-covered clips
// (random tie-break), then the session order and control positions are shuffled.
// Throws ValidationError on too few clips, duplicate ids or missing pairs, and
// ConfigError on empty control pools.
TestPlan build_test_plan(const std::vector<Stimulus>& clips, const ExperimentConfig& config,
                         std::uint64_t seed);

std::string plan_checksum(const TestPlan& plan);
std::string plan_to_json(const TestPlan& plan);
TestPlan plan_from_json(std::string_view text);

// Platform input file: one row per session.
csv::Table emit_input_rows(const TestPlan& plan);
// Inverse of emit_input_rows; randomization seeds are not part of the rows.
std::vector<SessionSpec> parse_input_rows(const csv::Table& table, const RatingScale& scale,
                                          const std::string& condition_pattern);

struct CcrPair {
  Stimulus reference;
  Stimulus processed;
  PresentationOrder order = PresentationOrder::reference_first;
};

struct CcrPairSet {
  std::vector<CcrPair> pairs;
  // One (reference, reference) trap per group of `pairs_per_session` pairs.
  std::vector<Stimulus> null_traps;
};

// Pairs references[i] with processed[i] and draws an independent fair order flag
// for each. Throws ValidationError when the lists cannot be matched.
CcrPairSet build_ccr_pairs(const std::vector<Stimulus>& references,
                           const std::vector<Stimulus>& processed, std::size_t pairs_per_session,
                           std::uint64_t seed);

// Trapping question in which both stimuli are the given reference. Expected
// answer is "about the same" (0) on CCR and "inaudible" (5) on DCR.
Stimulus make_null_trap(const std::string& reference_url, Method method);

struct TrappingClip {
  PcmAudio audio;
  int expected_answer = 0;
  double prefix_seconds = 0.0;
  std::size_t prefix_frames = 0;
  std::size_t message_frames = 0;
};

// Leading `prefix_seconds` of `source` followed by the spoken instruction in
// `message`. Throws ValidationError on a format mismatch or a prefix longer
// than the source.
TrappingClip create_trapping_clip(const PcmAudio& source, const PcmAudio& message,
                                  int expected_answer, double prefix_seconds = 3.0);

}  // namespace p808::builder
