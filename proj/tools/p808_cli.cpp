#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "p808/cleansing.hpp"
#include "p808/config.hpp"
#include "p808/csv.hpp"
#include "p808/error.hpp"
#include "p808/filter_analysis.hpp"
#include "p808/hit_app.hpp"
#include "p808/ingest.hpp"
#include "p808/numfmt.hpp"
#include "p808/platform.hpp"
#include "p808/simulator.hpp"
#include "p808/stats.hpp"
#include "p808/test_builder.hpp"
#include "p808/wav.hpp"

namespace fs = std::filesystem;
using namespace p808;

namespace {

ingest::ParseOptions parse_options(const ExperimentConfig& config) {
  ingest::ParseOptions o;
  o.scale = config.scale();
  o.condition_pattern = config.condition_pattern;
  o.default_gold_tolerance = config.gold_tolerance;
  return o;
}

ingest::AnswerBatch load_answers(const fs::path& path, const ExperimentConfig& config) {
  return ingest::parse_answer_batch(read_file(path), parse_options(config));
}

fs::path plan_file(const fs::path& p) { return fs::is_directory(p) ? p / "plan.json" : p; }

// --- build -----------------------------------------------------------------

struct BuildArgs {
  fs::path clips, config, out;
  fs::path templates = P808_TEMPLATE_DIR;
  std::uint64_t seed = 0;
};

int run_build(const BuildArgs& a) {
  auto config = load_config(a.config);
  const auto secret = resolve_secret(config.secret);
  const auto clips = builder::load_clip_list(read_file(a.clips), config);
  const auto plan = builder::build_test_plan(clips, config, a.seed);

  fs::create_directories(a.out);
  write_file(a.out / "plan.json", builder::plan_to_json(plan));
  const auto input = builder::emit_input_rows(plan);
  write_file(a.out / "input.csv", csv::write(input, true));

  std::optional<Timestamp> build_time;
  if (config.embed_build_timestamp) build_time = static_cast<Timestamp>(std::time(nullptr));
  write_bundle(builder::render_hit_app(config, secret, a.templates, input.header, build_time),
               a.out / "hit_app");

  config.plan_checksum = plan.checksum;
  write_file(a.out / "postprocess_config.json", dump_config(config));
  std::cout << "sessions: " << plan.sessions.size() << "\ncoverage per clip: " << plan.coverage_target()
            << "\nplan checksum: " << plan.checksum << '\n';
  return 0;
}

// --- trap ------------------------------------------------------------------

struct TrapArgs {
  fs::path source, message, out;
  int answer = 0;
  double prefix = 3.0;
};

int run_trap(const TrapArgs& a) {
  const auto clip = builder::create_trapping_clip(parse_wav(read_file(a.source)),
                                                  parse_wav(read_file(a.message)), a.answer, a.prefix);
  write_file(a.out, encode_wav(clip.audio));
  std::cout << "wrote " << a.out.string() << " (" << format_double(clip.audio.duration_seconds())
            << " s, expected answer " << clip.expected_answer << ")\n";
  return 0;
}

// --- simulate --------------------------------------------------------------

struct SimulateArgs {
  fs::path plan, config, population, latent, out, truth;
  std::uint64_t seed = 0;
  double run_bias = 0.0;
  Timestamp start_time = 1700000000;
};

int run_simulate(const SimulateArgs& a) {
  const auto plan = builder::plan_from_json(read_file(plan_file(a.plan)));
  fs::path config_path = a.config;
  if (config_path.empty()) {
    if (!fs::is_directory(a.plan)) throw ConfigError("--config is required when --plan is a file");
    config_path = a.plan / "postprocess_config.json";
  }
  const auto config = load_config(config_path);
  const auto workers =
      sim::synthesize_population(sim::parse_population(read_file(a.population)), a.seed);
  const auto latent = sim::parse_latent(read_file(a.latent));

  sim::RunOptions opts;
  opts.run_bias = a.run_bias;
  opts.start_time = a.start_time;
  opts.secret = resolve_secret(config.secret);
  const auto run = sim::simulate_run(plan, config, workers, latent, opts, derive_seed(a.seed, 7));
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  write_file(a.out, sim::answer_csv(run, config));

  if (!a.truth.empty()) {
    csv::Table t;
    t.header = {"worker_id", "archetype", "bias"};
    for (const auto& w : workers) t.rows.push_back({w.id, std::string(sim::to_string(w.archetype.kind)), format_double(w.bias)});
    write_file(a.truth, csv::write(t));
  }
  std::cout << "submissions: " << run.submissions.size() << '\n';
  return 0;
}

// --- clean -----------------------------------------------------------------

struct CleanArgs {
  fs::path answers, config, out;
};

int run_clean(const CleanArgs& a) {
  const auto config = load_config(a.config);
  const auto secret = resolve_secret(config.secret);
  const auto batch = load_answers(a.answers, config);
  const auto histories = ingest::reconstruct_sessions(batch.submissions);
  const auto result = cleansing::screen_batch(batch.submissions, histories, config, secret);

  fs::create_directories(a.out);
  write_file(a.out / "verdicts.csv", cleansing::verdicts_csv(result.verdicts));
  write_file(a.out / "usable_ratings.csv", cleansing::ratings_csv(result.usable_ratings));
  write_file(a.out / "approve.csv", cleansing::approve_csv(result));
  write_file(a.out / "reject.csv", cleansing::reject_csv(result));
  write_file(a.out / "bonus.csv", cleansing::bonus_csv(result, config.bonus.currency));
  write_file(a.out / "parse_report.json", batch.report.to_json().dump(2) + "\n");

  auto report = result.report.to_json();
  nlohmann::json anomalies = nlohmann::json::array();
  for (const auto& [worker, h] : histories) {
    for (const auto& an : h.anomalies) {
      anomalies.push_back({{"worker_id", worker},
                           {"assignment_id", an.assignment_id},
                           {"kind", ingest::to_string(an.kind)},
                           {"detail", an.detail}});
    }
  }
  report["anomalies"] = anomalies;
  report["parse_errors"] = batch.report.errors.size();
  write_file(a.out / "cleansing_report.json", report.dump(2) + "\n");

  std::cout << "submissions: " << result.report.submissions << "\naccepted: " << result.report.accepted
            << "\nusable: " << result.report.usable << "\nparse errors: " << batch.report.errors.size()
            << '\n';
  return 0;
}

// --- stats -----------------------------------------------------------------

struct StatsArgs {
  std::vector<fs::path> ratings;
  std::string reference;
  fs::path map_against;
  int order = 1;
  int min_votes = 1;
  std::size_t resample_votes = 0;
  std::size_t repeats = 10;
  std::uint64_t seed = 0;
  fs::path out;
};

bool is_ccr(const std::vector<Rating>& ratings) {
  return !ratings.empty() && std::all_of(ratings.begin(), ratings.end(),
                                         [](const Rating& r) { return r.presentation_order.has_value(); });
}

stats::AggregationResult scores(const std::vector<Rating>& ratings, stats::GroupBy by, std::size_t min_votes) {
  return is_ccr(ratings) ? stats::cmos(ratings, by, min_votes) : stats::aggregate(ratings, by, min_votes);
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

int run_stats(const StatsArgs& a) {
  const auto min_votes = static_cast<std::size_t>(std::max(1, a.min_votes));
  std::vector<std::vector<Rating>> runs;
  for (const auto& p : a.ratings) runs.push_back(cleansing::parse_ratings_csv(read_file(p)));
  const auto& first = runs.front();

  const auto per_stimulus = scores(first, stats::GroupBy::stimulus, 1);
  const auto per_condition = scores(first, stats::GroupBy::condition, min_votes);

  nlohmann::json analysis;
  analysis["method"] = is_ccr(first) ? "CMOS" : "MOS";
  analysis["ratings"] = first.size();
  nlohmann::json warnings = per_stimulus.warnings;
  for (const auto& w : per_condition.warnings) warnings.push_back(w);

  std::optional<std::vector<stats::KeyedScore>> dmos;
  if (!a.reference.empty()) {
    dmos = stats::dmos(per_condition.groups, a.reference);
    analysis["reference_condition"] = a.reference;
  }

  fs::create_directories(a.out);
  write_file(a.out / "per_stimulus.csv", stats::aggregates_csv(per_stimulus.groups, "stimulus_id"));
  {
    csv::Table t;
    t.header = {"condition", "mos", "sd", "n", "ci95"};
    if (dmos) t.header.push_back("dmos");
    for (std::size_t i = 0; i < per_condition.groups.size(); ++i) {
      const auto& g = per_condition.groups[i];
      std::vector<std::string> row{g.key, format_double(g.mos), g.sd ? format_double(*g.sd) : "",
                                   std::to_string(g.n), g.ci95 ? format_double(*g.ci95) : ""};
      if (dmos) row.push_back(format_double((*dmos)[i].value));
      t.rows.push_back(std::move(row));
    }
    write_file(a.out / "per_condition.csv", csv::write(t));
  }

  if (!a.map_against.empty()) {
    const auto t = csv::parse(read_file(a.map_against));
    const auto key = t.column("condition");
    std::optional<std::size_t> value;
    for (const char* name : {"score", "mos", "latent"}) {
      if (!value) value = t.column(name);
    }
    if (!key || !value) {
      throw ParseError("--map-against needs a 'condition' column and one of 'score', 'mos', 'latent'");
    }
    std::map<std::string, double> target;
    for (const auto& row : t.rows) {
      const auto v = parse_double(row.at(*value));
      if (!v) throw ParseError("invalid score for '" + row.at(*key) + "'");
      target[row.at(*key)] = *v;
    }
    std::vector<double> x, y;
    for (const auto& g : per_condition.groups) {
      if (const auto it = target.find(g.key); it != target.end()) {
        x.push_back(g.mos);
        y.push_back(it->second);
      }
    }
    const auto model = stats::fit_mapping(x, y, a.order);
    analysis["comparison"] = {{"conditions", x.size()},
                              {"pcc", stats::pcc(x, y)},
                              {"srcc", stats::srcc(x, y)},
                              {"rmse", stats::rmse(x, y)},
                              {"mapping",
                               {{"order", model.order},
                                {"coefficients", model.coefficients},
                                {"rmse", model.fit_rmse}}}};
    if (a.resample_votes > 0) {
      auto obs = stats::observations(first, stats::GroupBy::condition);
      if (is_ccr(first)) {
        obs.clear();
        for (const auto& r : first) {
          if (r.condition) obs.push_back({*r.condition, stats::normalized_ccr(r)});
        }
      }
      const auto rs = stats::resampled_comparison(obs, target, {a.resample_votes, a.repeats, a.order, a.seed});
      analysis["resampled"] = {{"votes_per_condition", a.resample_votes},
                               {"repeats", a.repeats},
                               {"seed", a.seed},
                               {"conditions", rs.conditions},
                               {"dropped", rs.dropped},
                               {"pcc", rs.pcc},
                               {"srcc", rs.srcc},
                               {"rmse", rs.rmse},
                               {"mapped_rmse", rs.mapped_rmse}};
    }
  }

  if (runs.size() > 1) {
    std::vector<std::map<std::string, double>> per_run;
    for (const auto& r : runs) {
      std::map<std::string, double> m;
      for (const auto& g : scores(r, stats::GroupBy::condition, min_votes).groups) m[g.key] = g.mos;
      per_run.push_back(std::move(m));
    }
    const auto matrix = stats::build_run_matrix(per_run);
    nlohmann::json rel{{"runs", runs.size()}, {"conditions", matrix.rows()}};
    if (matrix.rows() >= 2) {
      const auto icc = stats::icc_2_1(matrix);
      rel["icc_mos"] = icc.value;
      rel["icc_mos_degenerate"] = icc.degenerate;
      rel["mean_pcc"] = optional_json(stats::mean_pairwise_pcc(matrix));
      rel["mean_srcc"] = optional_json(stats::mean_pairwise_srcc(matrix));
      if (!a.reference.empty()) {
        const auto d = stats::to_dmos(matrix, a.reference);
        if (d.rows() >= 2) {
          const auto icc_d = stats::icc_2_1(d);
          rel["icc_dmos"] = icc_d.value;
          rel["icc_dmos_degenerate"] = icc_d.degenerate;
        }
      }
    }
    analysis["reliability"] = rel;
  }
  analysis["warnings"] = warnings;
  write_file(a.out / "analysis.json", analysis.dump(2) + "\n");
  std::cout << "conditions: " << per_condition.groups.size() << "\nstimuli: " << per_stimulus.groups.size()
            << '\n';
  return 0;
}

// --- bonus -----------------------------------------------------------------

struct BonusArgs {
  fs::path verdicts, config;
  bool dry_run = false;
  fs::path ledger = "platform_ledger.jsonl";
  fs::path outbox = "platform_outbox.jsonl";
  fs::path report;
  std::vector<std::size_t> fail_calls;
};

int run_bonus(const BonusArgs& a) {
  const auto config = load_config(a.config);
  const auto verdicts = cleansing::parse_verdicts_csv(read_file(a.verdicts));
  const auto actions = platform::plan_actions(verdicts, config);

  platform::IdempotencyLedger ledger(a.ledger);
  platform::FileMockTransport transport(a.outbox, {a.fail_calls.begin(), a.fail_calls.end()});
  const auto report = platform::execute(actions, a.dry_run ? nullptr : &transport, ledger, a.dry_run);
  const auto text = report.to_json().dump(2) + "\n";
  if (a.report.empty()) {
    std::cout << text;
  } else {
    write_file(a.report, text);
  }
  return report.count(platform::ActionStatus::failed) > 0 ? 3 : 0;
}

// --- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
  std::vector<fs::path> answers;
  fs::path config, out;
  std::vector<std::string> criteria{"playback", "earpods",       "trapping",
                                    "environment", "gold",        "variance",
                                    "qualification", "certificate_integrity", "headset", "all"};
};

int run_analyze(const AnalyzeArgs& a) {
  const auto config = load_config(a.config);
  const auto secret = resolve_secret(config.secret);
  std::vector<analysis::ScreenedRun> runs;
  for (const auto& p : a.answers) {
    runs.push_back(analysis::screen_run(load_answers(p, config).submissions, config, secret));
  }
  const auto result = analysis::analyze_filters(runs, a.criteria, config);
  const auto text = result.to_json().dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
    write_file(a.out, text);
  }
  for (const auto& c : result.criteria) {
    if (c.skipped) std::cerr << "note: " << c.criterion << " skipped: " << c.notice << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowdsourced speech-quality test toolkit: build, simulate, clean, analyze."};
  app.require_subcommand(1);

  BuildArgs build;
  auto* b = app.add_subcommand("build", "Build a test plan, platform input file and HIT app");
  b->add_option("--clips", build.clips, "Clip list CSV")->required()->check(CLI::ExistingFile);
  b->add_option("--config", build.config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  b->add_option("--seed", build.seed, "Randomization seed")->required();
  b->add_option("--out", build.out, "Output directory")->required();
  b->add_option("--templates", build.templates, "HIT app template directory")->check(CLI::ExistingDirectory);

  TrapArgs trap;
  auto* t = app.add_subcommand("trap", "Create a trapping clip from a source clip and a spoken instruction");
  t->add_option("--source", trap.source, "Source WAV")->required()->check(CLI::ExistingFile);
  t->add_option("--message", trap.message, "Instruction WAV")->required()->check(CLI::ExistingFile);
  t->add_option("--answer", trap.answer, "Answer dictated by the instruction")->required();
  t->add_option("--prefix-seconds", trap.prefix, "Seconds of the source played first");
  t->add_option("--out", trap.out, "Output WAV")->required();

  SimulateArgs simulate;
  auto* s = app.add_subcommand("simulate", "Simulate workers answering a test plan");
  s->add_option("--plan", simulate.plan, "Build output directory or plan.json")->required()->check(CLI::ExistingPath);
  s->add_option("--config", simulate.config, "Config JSON (default: <plan dir>/postprocess_config.json)");
  s->add_option("--population", simulate.population, "Population spec JSON")->required()->check(CLI::ExistingFile);
  s->add_option("--latent", simulate.latent, "Latent condition scores CSV")->required()->check(CLI::ExistingFile);
  s->add_option("--seed", simulate.seed, "Simulation seed")->required();
  s->add_option("--run-bias", simulate.run_bias, "Offset added to every rating of this run");
  s->add_option("--start-time", simulate.start_time, "Unix time of the first session");
  s->add_option("--truth", simulate.truth, "Write the worker ground truth CSV here");
  s->add_option("--out", simulate.out, "Answer batch CSV")->required();

  CleanArgs clean;
  auto* c = app.add_subcommand("clean", "Screen an answer batch and write verdicts and reports");
  c->add_option("--answers", clean.answers, "Answer batch CSV")->required()->check(CLI::ExistingFile);
  c->add_option("--config", clean.config, "Config JSON")->required()->check(CLI::ExistingFile);
  c->add_option("--out", clean.out, "Output directory")->required();

  StatsArgs st;
  auto* sc = app.add_subcommand("stats", "Aggregate usable ratings and compute comparison statistics");
  sc->add_option("--ratings", st.ratings, "Usable ratings CSV; repeat for several runs")
      ->required()
      ->check(CLI::ExistingFile);
  sc->add_option("--reference", st.reference, "Reference condition for DMOS");
  sc->add_option("--map-against", st.map_against, "CSV with condition,score to compare against")
      ->check(CLI::ExistingFile);
  sc->add_option("--order", st.order, "Mapping polynomial order")->check(CLI::IsMember({1, 3}));
  sc->add_option("--min-votes", st.min_votes, "Minimum votes per condition");
  sc->add_option("--resample-votes", st.resample_votes, "Votes drawn per condition for the resampled comparison")
      ->needs("--map-against");
  sc->add_option("--repeats", st.repeats, "Resampling repeats")->check(CLI::PositiveNumber);
  sc->add_option("--seed", st.seed, "Resampling seed");
  sc->add_option("--out", st.out, "Output directory")->required();

  BonusArgs bonus;
  auto* bo = app.add_subcommand("bonus", "Approve, reject and pay bonuses through the platform transport");
  bo->add_option("--verdicts", bonus.verdicts, "verdicts.csv from clean")->required()->check(CLI::ExistingFile);
  bo->add_option("--config", bonus.config, "Config JSON")->required()->check(CLI::ExistingFile);
  bo->add_flag("--dry-run", bonus.dry_run, "Report what would be done without sending anything");
  bo->add_option("--ledger", bonus.ledger, "Idempotency ledger (JSON lines)");
  bo->add_option("--outbox", bonus.outbox, "Mock transport outbox (JSON lines)");
  bo->add_option("--report", bonus.report, "Write the execution report here instead of stdout");
  bo->add_option("--fail-call", bonus.fail_calls, "Make the mock transport fail on this call (1-based)");

  AnalyzeArgs an;
  auto* az = app.add_subcommand("analyze", "Compare reliability of passed and failed groups per filter");
  az->add_option("--answers", an.answers, "Answer batch CSV per run (at least two)")
      ->required()
      ->check(CLI::ExistingFile);
  az->add_option("--config", an.config, "Config JSON")->required()->check(CLI::ExistingFile);
  az->add_option("--criteria", an.criteria, "Criteria to analyze ('all' compares usable vs unusable)")
      ->delimiter(',');
  az->add_option("--out", an.out, "Output JSON (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*b) return run_build(build);
    if (*t) return run_trap(trap);
    if (*s) return run_simulate(simulate);
    if (*c) return run_clean(clean);
    if (*sc) return run_stats(st);
    if (*bo) return run_bonus(bonus);
    if (*az) return run_analyze(an);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
