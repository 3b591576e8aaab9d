#include <gtest/gtest.h>

#include <map>
#include <set>

#include "oracles.hpp"
#include "p808/error.hpp"
#include "p808/simulator.hpp"
#include "p808/stats.hpp"
#include "scenarios.hpp"

namespace {

using namespace p808;
using namespace p808::sim;

WorkerArchetype archetype(ArchetypeKind k) { return WorkerArchetype::defaults(k); }

WorkerArchetype exact_rater() {
  auto a = archetype(ArchetypeKind::reliable);
  a.noise_sd = 0.0;
  a.bias_sd = 0.0;
  a.trapping_accuracy = 1.0;
  a.playback_completion = 1.0;
  a.earpods_accuracy = 1.0;
  a.env_accuracy = 1.0;
  return a;
}

builder::TestPlan plan(const ExperimentConfig& config, std::size_t conditions, std::size_t clips, bool paired,
                       std::uint64_t seed) {
  return builder::build_test_plan(builder::load_clip_list(scenario::clip_list_csv(conditions, clips, paired), config),
                                  config, seed);
}

TEST(Population, ShareCounts) {
  EXPECT_EQ(share_counts(scenario::population(125, {{archetype(ArchetypeKind::reliable), 0.8},
                                                    {archetype(ArchetypeKind::spammer), 0.2}})),
            (std::vector<std::size_t>{100, 25}));
  EXPECT_EQ(share_counts(scenario::population(10, {{archetype(ArchetypeKind::reliable), 0.5},
                                                   {archetype(ArchetypeKind::noisy_env), 0.3},
                                                   {archetype(ArchetypeKind::spammer), 0.2}})),
            (std::vector<std::size_t>{5, 3, 2}));
  // Largest remainder: 7/3 each leaves one extra worker for the first share.
  const auto third = 1.0 / 3.0;
  EXPECT_EQ(share_counts(scenario::population(7, {{archetype(ArchetypeKind::reliable), third},
                                                  {archetype(ArchetypeKind::noisy_env), third},
                                                  {archetype(ArchetypeKind::spammer), third}})),
            (std::vector<std::size_t>{3, 2, 2}));
}

TEST(Population, CountsAlwaysSumToSize) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t size = std::uniform_int_distribution<std::size_t>(1, 300)(rng);
    std::vector<double> w(std::uniform_int_distribution<std::size_t>(1, 4)(rng));
    double sum = 0;
    for (auto& x : w) sum += (x = std::uniform_real_distribution<double>(0.01, 1.0)(rng));
    std::vector<std::pair<WorkerArchetype, double>> shares;
    for (double x : w) shares.push_back({archetype(ArchetypeKind::reliable), x / sum});
    const auto counts = share_counts(scenario::population(size, shares));
    std::size_t total = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      total += counts[i];
      EXPECT_LE(std::abs(static_cast<double>(counts[i]) - shares[i].second * static_cast<double>(size)), 1.0);
    }
    EXPECT_EQ(total, size);
  }
}

TEST(Population, SeededAndShuffled) {
  const auto spec = scenario::population(50, {{archetype(ArchetypeKind::reliable), 0.8},
                                              {archetype(ArchetypeKind::spammer), 0.2}});
  const auto a = synthesize_population(spec, 9);
  EXPECT_EQ(a, synthesize_population(spec, 9));
  EXPECT_NE(a, synthesize_population(spec, 10));
  std::set<std::string> ids, fingerprints;
  std::size_t spammers = 0;
  for (const auto& w : a) {
    ids.insert(w.id);
    fingerprints.insert(w.fingerprint);
    spammers += w.archetype.kind == ArchetypeKind::spammer;
  }
  EXPECT_EQ(ids.size(), 50u);
  EXPECT_EQ(fingerprints.size(), 50u);
  EXPECT_EQ(spammers, 10u);
  // Spammers are not all at the end of the id range.
  std::size_t tail = 0;
  for (std::size_t i = 40; i < 50; ++i) tail += a[i].archetype.kind == ArchetypeKind::spammer;
  EXPECT_LT(tail, 10u);
}

TEST(Population, Validation) {
  EXPECT_THROW(share_counts(scenario::population(0, {{archetype(ArchetypeKind::reliable), 1.0}})),
               ValidationError);
  EXPECT_THROW(share_counts(scenario::population(10, {{archetype(ArchetypeKind::reliable), 0.7}})),
               ValidationError);
  EXPECT_THROW(share_counts(scenario::population(10, {})), ValidationError);
  auto bad = archetype(ArchetypeKind::reliable);
  bad.trapping_accuracy = 1.2;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = archetype(ArchetypeKind::reliable);
  bad.noise_sd = -0.1;
  EXPECT_THROW(bad.validate(), ValidationError);
  for (auto k : {ArchetypeKind::reliable, ArchetypeKind::spammer, ArchetypeKind::noisy_env,
                 ArchetypeKind::no_headset}) {
    EXPECT_NO_THROW(archetype(k).validate());
    EXPECT_EQ(archetype_from_string(to_string(k)), k);
  }
  EXPECT_THROW(archetype_from_string("bot"), ValidationError);
}

TEST(Population, ParseJsonWithDefaults) {
  const auto spec = parse_population(R"({"size": 20, "archetypes": [
      {"kind": "reliable", "fraction": 0.75, "noise_sd": 0.3},
      {"kind": "spammer", "fraction": 0.25}]})");
  EXPECT_EQ(spec.size, 20u);
  ASSERT_EQ(spec.shares.size(), 2u);
  EXPECT_DOUBLE_EQ(spec.shares[0].archetype.noise_sd, 0.3);
  EXPECT_EQ(spec.shares[1].archetype.uniform_ratings, true);
  EXPECT_DOUBLE_EQ(spec.shares[1].archetype.trapping_accuracy, 0.0);

  nlohmann::json j = spec.shares[0].archetype;
  EXPECT_EQ(j.get<WorkerArchetype>().noise_sd, 0.3);

  EXPECT_THROW(parse_population("{"), ParseError);
  EXPECT_THROW(parse_population(R"({"archetypes": []})"), ParseError);
  EXPECT_THROW(parse_population(R"({"size": 5, "archetypes": [{"kind": "reliable", "fraction": 0.5}]})"),
               ValidationError);
}

TEST(Latent, ParseAndValidate) {
  const auto l = parse_latent("condition,latent\nc01,4.5\nc02,1.25\n");
  EXPECT_EQ(l, (LatentQuality{{"c01", 4.5}, {"c02", 1.25}}));
  EXPECT_THROW(parse_latent("condition,score\nc01,4\n"), ParseError);
  EXPECT_THROW(parse_latent("condition,latent\nc01,x\n"), ParseError);
  EXPECT_THROW(parse_latent("condition,latent\nc01,4\nc01,3\n"), ParseError);
  const auto acr = scenario::acr_config().scale();
  EXPECT_NO_THROW(validate_latent(l, acr));
  EXPECT_THROW(validate_latent({{"c01", 5.5}}, acr), ValidationError);
  EXPECT_THROW(validate_latent({{"c01", -1.0}}, acr), ValidationError);
}

TEST(DrawRating, RoundsClampsAndCentres) {
  const auto scale = scenario::acr_config().scale();
  Rng rng(1);
  EXPECT_EQ(draw_rating(4.0, 0.0, 0.0, scale, rng), 4);
  EXPECT_EQ(draw_rating(3.6, 0.0, 0.0, scale, rng), 4);
  EXPECT_EQ(draw_rating(3.0, -0.6, 0.0, scale, rng), 2);
  EXPECT_EQ(draw_rating(5.0, 2.0, 0.0, scale, rng), 5);
  EXPECT_EQ(draw_rating(1.0, -2.0, 0.0, scale, rng), 1);
  double sum = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const int v = draw_rating(3.0, 0.0, 0.5, scale, rng);
    ASSERT_GE(v, 1);
    ASSERT_LE(v, 5);
    sum += v;
  }
  EXPECT_NEAR(sum / n, 3.0, 0.02);
}

TEST(SimulateRun, ExactRaterReproducesLatent) {
  const auto config = scenario::acr_config();
  const auto p = plan(config, 4, 12, false, 2);
  LatentQuality latent;
  for (std::size_t c = 1; c <= 4; ++c) latent[scenario::condition_label(c)] = 4.0;
  const auto workers = synthesize_population(scenario::population(30, {{exact_rater(), 1.0}}), 3);
  const auto run = simulate_run(p, config, workers, latent, scenario::run_options(), 4);
  for (const auto& s : run.submissions) {
    for (const auto& r : s.ratings) EXPECT_EQ(r.value, 4);
    EXPECT_EQ(s.trapping.answer, s.trapping.expected);
    EXPECT_EQ(s.gold.answer, s.gold.expected);
  }
}

TEST(SimulateRun, CcrSignFollowsOrder) {
  const auto config = scenario::method_config(Method::CCR);
  const auto p = plan(config, 3, 12, true, 2);
  LatentQuality latent;
  for (std::size_t c = 1; c <= 3; ++c) latent[scenario::condition_label(c)] = -2.0;
  const auto workers = synthesize_population(scenario::population(30, {{exact_rater(), 1.0}}), 3);
  const auto run = simulate_run(p, config, workers, latent, scenario::run_options(), 4);
  std::set<PresentationOrder> seen;
  for (const auto& s : run.submissions) {
    for (const auto& r : s.ratings) {
      ASSERT_TRUE(r.presentation_order.has_value());
      seen.insert(*r.presentation_order);
      EXPECT_EQ(r.value, *r.presentation_order == PresentationOrder::reference_first ? -2 : 2);
      EXPECT_DOUBLE_EQ(stats::normalized_ccr(r), -2.0);
    }
  }
  EXPECT_EQ(seen.size(), 2u);
}

TEST(SimulateRun, StructuralInvariants) {
  const auto config = scenario::acr_config();
  const auto p = plan(config, 6, 12, false, 5);
  const auto workers = synthesize_population(
      scenario::population(40, {{archetype(ArchetypeKind::reliable), 0.7}, {archetype(ArchetypeKind::spammer), 0.3}}),
      6);
  const auto latent = scenario::spread_latent(6, 1.5, 4.5);
  const auto run = simulate_run(p, config, workers, latent, scenario::run_options(), 7);
  EXPECT_EQ(run.submissions, simulate_run(p, config, workers, latent, scenario::run_options(), 7).submissions);
  ASSERT_EQ(run.submissions.size(), p.sessions.size());

  std::set<std::string> assignments;
  std::map<std::string, std::set<std::string>> rated;
  for (std::size_t i = 0; i < run.submissions.size(); ++i) {
    const auto& s = run.submissions[i];
    EXPECT_EQ(s.session_id, p.sessions[i].session_id);
    EXPECT_TRUE(assignments.insert(s.assignment_id).second);
    EXPECT_EQ(s.ratings.size(), p.sessions[i].rating_stimuli.size());
    for (const auto& r : s.ratings) {
      EXPECT_TRUE(rated[s.worker_id].insert(r.stimulus_id).second) << s.worker_id << " re-rated " << r.stimulus_id;
    }
  }
  // Exactly one qualification per worker who appears.
  std::map<std::string, int> quals;
  for (const auto& s : run.submissions) quals[s.worker_id] += s.qualification.has_value();
  for (const auto& [w, n] : quals) EXPECT_EQ(n, 1) << w;
  EXPECT_EQ(run.worker_kinds.size(), workers.size());
}

TEST(SimulateRun, SpammerTrappingPassRateIsChance) {
  const auto config = scenario::acr_config();
  const auto p = plan(config, 30, 20, false, 8);
  const auto workers =
      synthesize_population(scenario::population(150, {{archetype(ArchetypeKind::spammer), 1.0}}), 9);
  const auto run = simulate_run(p, config, workers, scenario::spread_latent(30, 1.5, 4.5), scenario::run_options(), 10);
  std::size_t hits = 0;
  for (const auto& s : run.submissions) hits += s.trapping.answer == s.trapping.expected;
  const double n = static_cast<double>(run.submissions.size());
  ASSERT_GE(n, 200.0);
  // Within four standard errors of 1/5.
  EXPECT_NEAR(static_cast<double>(hits) / n, 0.2, 4.0 * std::sqrt(0.2 * 0.8 / n));
}

TEST(SimulateRun, HonestRatingsTrackLatent) {
  const auto config = scenario::acr_config();
  const auto p = plan(config, 12, 16, false, 11);
  const auto latent = scenario::spread_latent(12, 1.5, 4.5);
  const auto workers =
      synthesize_population(scenario::population(80, {{archetype(ArchetypeKind::reliable), 1.0}}), 12);
  const auto run = simulate_run(p, config, workers, latent, scenario::run_options(), 13);
  std::map<std::string, oracle::Vec> votes;
  for (const auto& s : run.submissions) {
    for (const auto& r : s.ratings) votes[*r.condition].push_back(r.value);
  }
  oracle::Vec mos, truth;
  for (const auto& [c, v] : votes) {
    mos.push_back(oracle::mean(v));
    truth.push_back(latent.at(c));
  }
  EXPECT_EQ(mos.size(), 12u);
  EXPECT_GE(oracle::pcc(mos, truth), 0.99);
}

TEST(SimulateRun, RejectsMissingLatentAndEmptyPopulation) {
  const auto config = scenario::acr_config();
  const auto p = plan(config, 3, 12, false, 1);
  const auto workers = synthesize_population(scenario::population(30, {{exact_rater(), 1.0}}), 1);
  EXPECT_THROW(simulate_run(p, config, workers, {{"c01", 3.0}}, scenario::run_options(), 1), ValidationError);
  EXPECT_THROW(simulate_run(p, config, {}, scenario::spread_latent(3, 2, 4), scenario::run_options(), 1),
               ValidationError);
  // Two workers cannot cover five votes per clip without repeats.
  const auto few = synthesize_population(scenario::population(2, {{exact_rater(), 1.0}}), 1);
  EXPECT_THROW(simulate_run(p, config, few, scenario::spread_latent(3, 2, 4), scenario::run_options(), 1),
               ValidationError);
}

}  // namespace
