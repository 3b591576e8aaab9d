#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "p808/config.hpp"
#include "p808/ingest.hpp"
#include "p808/rng.hpp"
#include "p808/test_builder.hpp"
#include "p808/types.hpp"

namespace p808::sim {

enum class ArchetypeKind { reliable, spammer, noisy_env, no_headset };

std::string_view to_string(ArchetypeKind k);
ArchetypeKind archetype_from_string(std::string_view s);

// Behavioral model of one class of workers. Accuracies are the probability of
// answering correctly on purpose; a miss falls back to a uniform guess.
struct WorkerArchetype {
  ArchetypeKind kind = ArchetypeKind::reliable;
  double bias = 0.0;     // mean per-worker rating offset
  double bias_sd = 0.0;  // spread of the per-worker offset
  double noise_sd = 0.5;
  bool uniform_ratings = false;  // rates uniformly at random, ignoring the clip
  double trapping_accuracy = 1.0;
  double env_accuracy = 1.0;  // per environment pair
  double playback_completion = 1.0;  // per session
  double earpods_accuracy = 1.0;
  double qualification_pass = 1.0;
  double headset_probability = 0.4;

  // Throws ValidationError on probabilities outside [0, 1] or negative SDs.
  void validate() const;
  static WorkerArchetype defaults(ArchetypeKind kind);

  friend bool operator==(const WorkerArchetype&, const WorkerArchetype&) = default;
};

void to_json(nlohmann::json& j, const WorkerArchetype& a);
// Missing fields take the defaults of the given kind.
void from_json(const nlohmann::json& j, WorkerArchetype& a);

struct PopulationShare {
  WorkerArchetype archetype;
  double fraction = 0.0;
};

struct PopulationSpec {
  std::size_t size = 0;
  std::vector<PopulationShare> shares;

  void validate() const;
};

// {"size": 125, "archetypes": [{"kind": "reliable", "fraction": 0.8, ...}, ...]}
PopulationSpec parse_population(std::string_view json_text);

struct SimWorker {
  std::string id;
  WorkerArchetype archetype;
  double bias = 0.0;  // this worker's drawn offset
  std::string fingerprint;

  friend bool operator==(const SimWorker&, const SimWorker&) = default;
};

// Largest-remainder counts per share; workers are shuffled so ids carry no
// archetype information.
std::vector<SimWorker> synthesize_population(const PopulationSpec& spec, std::uint64_t seed);
std::vector<std::size_t> share_counts(const PopulationSpec& spec);

// True score per condition on the method's scale (CMOS for CCR).
using LatentQuality = std::map<std::string, double>;

// CSV with columns `condition` and `latent`.
LatentQuality parse_latent(std::string_view csv_text);
// Throws ValidationError when a score lies outside the scale.
void validate_latent(const LatentQuality& latent, const RatingScale& scale);

struct RunOptions {
  double run_bias = 0.0;  // added to every deliberate rating of the run
  Timestamp start_time = 1700000000;
  std::string secret;  // signs client certificates
  std::string assignment_prefix = "a";
};

struct SimulatedRun {
  std::vector<ingest::Submission> submissions;
  std::map<std::string, ArchetypeKind> worker_kinds;  // ground truth per worker id
};

// Rating drawn for one deliberate answer: clamp(round(latent + bias + noise)).
int draw_rating(double latent, double bias, double noise_sd, const RatingScale& scale, Rng& rng);

// One submission per plan session. Each session goes to a random eligible
// worker: not disabled by a failed qualification and not having rated any of
// the session's clips before. Throws ValidationError when a rated condition has
// no latent score or no eligible worker remains.
SimulatedRun simulate_run(const builder::TestPlan& plan, const ExperimentConfig& config,
                          const std::vector<SimWorker>& workers, const LatentQuality& latent,
                          const RunOptions& options, std::uint64_t seed);

// Answer batch CSV in the ingest schema.
std::string answer_csv(const SimulatedRun& run, const ExperimentConfig& config);

}  // namespace p808::sim
