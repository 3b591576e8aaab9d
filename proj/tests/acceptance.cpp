// Acceptance suite: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails. Optional argv[1]: path of the p808 CLI binary for
// the command-line determinism check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "p808/cleansing.hpp"
#include "p808/config.hpp"
#include "p808/csv.hpp"
#include "p808/filter_analysis.hpp"
#include "p808/hit_app.hpp"
#include "p808/numfmt.hpp"
#include "p808/stats.hpp"
#include "p808/test_builder.hpp"
#include "scenarios.hpp"

namespace fs = std::filesystem;
using namespace p808;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  char t[32];
  std::snprintf(t, sizeof t, "%.2fs", secs);
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << " [" << t << "] " << o.detail << std::endl;
}

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- statistics oracle suite ----------------------------------------------

Outcome stats_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(1.0, 5.0);
  std::uniform_int_distribution<int> likert(1, 5);
  const int instances = 200;
  double worst = 0;
  std::map<std::string, int> checked;
  auto track = [&](const std::string& what, double a, double b) {
    worst = std::max(worst, std::abs(a - b));
    if (!(std::abs(a - b) <= 1e-9)) throw std::runtime_error(what + " mismatch: " + fmt(a, 15) + " vs " + fmt(b, 15));
  };
  auto varied = [&](std::size_t n, bool integer) {
    for (;;) {
      oracle::Vec v(n);
      for (auto& x : v) x = integer ? likert(rng) : u(rng);
      if (std::any_of(v.begin(), v.end(), [&](double x) { return x != v[0]; })) return v;
    }
  };

  for (int i = 0; i < instances; ++i) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(3, 10)(rng);
    const bool integer = i % 2 == 1;
    const auto x = varied(n, integer);
    const auto y = varied(n, integer);
    track("pcc", stats::pcc(x, y), oracle::pcc(x, y));
    track("srcc", stats::srcc(x, y), oracle::srcc(x, y));
    track("rmse", stats::rmse(x, y), oracle::rmse(x, y));
    checked["pcc"]++;
    checked["srcc"]++;
    checked["rmse"]++;
  }

  for (int i = 0; i < instances; ++i) {
    const int order = i % 2 == 0 ? 1 : 3;
    const std::size_t n = std::uniform_int_distribution<std::size_t>(static_cast<std::size_t>(order) + 1, 10)(rng);
    oracle::Vec x;
    while (x.size() < n) {
      const double c = u(rng);
      if (std::all_of(x.begin(), x.end(), [&](double v) { return std::abs(v - c) > 0.05; })) x.push_back(c);
    }
    oracle::Vec y(n);
    for (auto& v : y) v = u(rng);
    const auto model = stats::fit_mapping(x, y, order);
    const auto coef = oracle::polyfit(x, y, order);
    oracle::Vec fitted(n);
    for (std::size_t k = 0; k < n; ++k) {
      fitted[k] = oracle::polyval(coef, x[k]);
      track("fit value", model(x[k]), fitted[k]);
    }
    track("fit rmse", model.fit_rmse, oracle::rmse(fitted, y));
    checked["fit_mapping"]++;
  }

  for (int i = 0; i < instances; ++i) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 10)(rng);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(2, 10)(rng);
    stats::RunMatrix m;
    for (std::size_t r = 0; r < n; ++r) {
      std::vector<double> row(k);
      for (auto& v : row) v = u(rng);
      m.cells.push_back(row);
    }
    track("icc", stats::icc_2_1(m).value, oracle::icc_2_1(m.cells));
    checked["icc_2_1"]++;
  }

  std::uniform_real_distribution<double> ur(-0.99, 0.99);
  for (int i = 0; i < instances; ++i) {
    const double r1 = ur(rng), r2 = ur(rng);
    const auto n1 = std::uniform_int_distribution<std::size_t>(4, 200)(rng);
    const auto n2 = std::uniform_int_distribution<std::size_t>(4, 200)(rng);
    const double alpha = i % 3 == 0 ? 0.01 : 0.05;
    const auto f = stats::fisher_z_test(r1, n1, r2, n2, alpha);
    const double z = oracle::fisher_z_stat(r1, n1, r2, n2);
    const double crit = oracle::normal_critical(alpha);
    track("fisher z", f.z_stat, z);
    track("fisher critical", f.critical, crit);
    if (f.significant != (std::abs(z) > crit)) throw std::runtime_error("fisher significance mismatch");
    checked["fisher_z_test"]++;
  }

  const double secs = seconds_since(t0);
  std::string counts;
  for (const auto& [k, v] : checked) counts += k + "=" + std::to_string(v) + " ";
  const bool fast = secs < 10.0;
  char buf[96];
  std::snprintf(buf, sizeof buf, "max |diff|=%.3g runtime %.2fs (limit 10s, tol 1e-9)", worst, secs);
  return {fast, counts + buf};
}

// --- five-run DMOS ICC example ------------------------------------------------

Outcome five_run_icc() {
  const auto t0 = std::chrono::steady_clock::now();
  stats::RunMatrix m;
  m.targets = {"Model1", "Model2", "Model3", "Model4"};
  m.cells = {{0.52, 0.42, 0.47, 0.43, 0.43},
             {0.37, 0.32, 0.36, 0.28, 0.33},
             {0.40, 0.31, 0.36, 0.30, 0.31},
             {0.16, 0.11, 0.17, 0.13, 0.14}};
  const double icc = stats::icc_2_1(m).value;
  const double secs = seconds_since(t0);
  const bool ok = std::abs(icc - 0.907) <= 0.02 && secs < 1.0;
  return {ok, "ICC(2,1)=" + fmt(icc) + " target 0.907+-0.02"};
}

// --- end-to-end simulation scenarios ----------------------------------------

struct E2E {
  ExperimentConfig config;
  builder::TestPlan plan;
  sim::LatentQuality latent;
  scenario::Pipeline pipeline;
  std::vector<sim::SimWorker> workers;
};

E2E& e2e() {
  static E2E s = [] {
    E2E e;
    e.config = scenario::acr_config();
    const auto clips = builder::load_clip_list(scenario::clip_list_csv(50, 10), e.config);
    e.plan = builder::build_test_plan(clips, e.config, 11);
    e.latent = scenario::spread_latent(50, 1.5, 4.5);
    e.workers = sim::synthesize_population(
        scenario::population(125, {{sim::WorkerArchetype::defaults(sim::ArchetypeKind::reliable), 0.8},
                                   {sim::WorkerArchetype::defaults(sim::ArchetypeKind::spammer), 0.2}}),
        21);
    e.pipeline = scenario::run_pipeline(e.plan, e.config, e.workers, e.latent, scenario::run_options(), 31);
    return e;
  }();
  return s;
}

std::pair<std::vector<double>, std::vector<double>> recovered_vs_latent(
    const std::map<std::string, double>& mos, const sim::LatentQuality& latent) {
  std::vector<double> x, y;
  for (const auto& [c, v] : mos) {
    x.push_back(v);
    y.push_back(latent.at(c));
  }
  return {x, y};
}

Outcome end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  auto& e = e2e();
  const auto& p = e.pipeline;
  if (!p.batch.report.errors.empty()) return {false, "parse errors in simulated batch"};
  const auto mos = stats::condition_mos(p.screening.usable_ratings);
  if (mos.size() != 50) return {false, "recovered " + std::to_string(mos.size()) + " of 50 conditions"};
  const auto [x, y] = recovered_vs_latent(mos, e.latent);
  const double r = stats::pcc(x, y);
  const double rho = stats::srcc(x, y);

  std::size_t spam = 0, spam_unusable = 0;
  for (const auto& v : p.screening.verdicts) {
    if (p.run.worker_kinds.at(v.worker_id) != sim::ArchetypeKind::spammer) continue;
    ++spam;
    if (!v.ratings_usable) ++spam_unusable;
  }
  const double rate = spam == 0 ? 0.0 : static_cast<double>(spam_unusable) / static_cast<double>(spam);
  const double secs = seconds_since(t0);
  const bool ok = r >= 0.99 && rho >= 0.95 && rate >= 0.75 && spam > 0 && secs < 60.0;
  return {ok, "sessions=" + std::to_string(p.batch.submissions.size()) + " PCC=" + fmt(r) + " (>=0.99) SRCC=" +
                  fmt(rho) + " (>=0.95) spammer unusable rate=" + fmt(rate) + " of " + std::to_string(spam) +
                  " (>=0.75)"};
}

Outcome dmos_offset_invariance() {
  auto& e = e2e();
  const auto& ratings = e.pipeline.screening.usable_ratings;
  const auto base = stats::aggregate(stats::observations(ratings, stats::GroupBy::condition));
  const auto base_dmos = stats::dmos(base.groups, "c01");
  double worst_mos = 0, worst_dmos = 0;
  for (double c : {0.37, -1.25, 2.0, 1e-3}) {
    auto obs = stats::observations(ratings, stats::GroupBy::condition);
    for (auto& o : obs) o.value += c;
    const auto shifted = stats::aggregate(obs);
    const auto d = stats::dmos(shifted.groups, "c01");
    for (std::size_t i = 0; i < base.groups.size(); ++i) {
      worst_mos = std::max(worst_mos, std::abs(shifted.groups[i].mos - (base.groups[i].mos + c)));
      worst_dmos = std::max(worst_dmos, std::abs(d[i].value - base_dmos[i].value));
    }
  }
  const bool ok = worst_mos <= 1e-12 && worst_dmos <= 1e-12;
  char buf[128];
  std::snprintf(buf, sizeof buf, "max |MOS shift - c|=%.3g max |dDMOS|=%.3g (tol 1e-12)", worst_mos, worst_dmos);
  return {ok, buf};
}

Outcome mapping_dominance() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::uniform_real_distribution<double> u(1.0, 5.0);
  int sets = 0;
  double min_gap1 = 1e9, min_gap3 = 1e9;
  auto check = [&](const std::vector<double>& x, const std::vector<double>& y) {
    const double raw = stats::rmse(x, y);
    const double r1 = stats::fit_mapping(x, y, 1).fit_rmse;
    const double r3 = stats::fit_mapping(x, y, 3).fit_rmse;
    min_gap1 = std::min(min_gap1, raw - r1);
    min_gap3 = std::min(min_gap3, r1 - r3);
    ++sets;
    return r1 <= raw + 1e-12 && r3 <= r1 + 1e-12;
  };
  bool ok = true;
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(4, 60)(rng);
    std::vector<double> x(n), y(n);
    const double a = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    const double b = std::uniform_real_distribution<double>(0.5, 1.5)(rng);
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = u(rng);
      y[k] = a + b * x[k] + 0.05 * x[k] * x[k] + noise(rng);
    }
    ok = check(x, y) && ok;
  }
  const auto mos = stats::condition_mos(e2e().pipeline.screening.usable_ratings);
  const auto [x, y] = recovered_vs_latent(mos, e2e().latent);
  ok = check(x, y) && ok;
  return {ok, std::to_string(sets) + " fit sets; min(raw-first)=" + fmt(min_gap1, 6) +
                  " min(first-third)=" + fmt(min_gap3, 6)};
}

Outcome reproducibility() {
  auto& e = e2e();
  const auto make_workers = [](std::uint64_t seed) {
    return sim::synthesize_population(
        scenario::population(125, {{sim::WorkerArchetype::defaults(sim::ArchetypeKind::reliable), 0.8},
                                   {sim::WorkerArchetype::defaults(sim::ArchetypeKind::spammer), 0.2}}),
        seed);
  };
  auto opts_b = scenario::run_options(0.3);
  opts_b.assignment_prefix = "b";
  const auto a = scenario::run_pipeline(e.plan, e.config, make_workers(101), e.latent, scenario::run_options(0.0), 1001);
  const auto b = scenario::run_pipeline(e.plan, e.config, make_workers(202), e.latent, opts_b, 2002);
  const auto matrix = stats::build_run_matrix(
      {stats::condition_mos(a.screening.usable_ratings), stats::condition_mos(b.screening.usable_ratings)});
  const auto dmos = stats::to_dmos(matrix, "c01");
  const double icc_dmos = stats::icc_2_1(dmos).value;
  const double icc_mos = stats::icc_2_1(matrix).value;
  const double r = stats::pcc(matrix.column(0), matrix.column(1));
  const double rho = stats::srcc(matrix.column(0), matrix.column(1));
  double shift = 0;
  for (const auto& row : matrix.cells) shift += row[1] - row[0];
  shift /= static_cast<double>(matrix.rows());
  const bool ok = icc_dmos >= 0.9 && r >= 0.99;
  return {ok, "conditions=" + std::to_string(matrix.rows()) + " ICC_DMOS=" + fmt(icc_dmos) + " (>=0.9) PCC=" + fmt(r) +
                  " (>=0.99) [ICC_MOS=" + fmt(icc_mos) + " SRCC=" + fmt(rho) + " mean MOS shift=" + fmt(shift) + "]"};
}

Outcome filter_impact() {
  auto config = scenario::acr_config();
  const auto clips = builder::load_clip_list(scenario::clip_list_csv(10, 24), config);
  const auto plan = builder::build_test_plan(clips, config, 5);
  const auto latent = scenario::spread_latent(10, 1.5, 4.5);

  // Careless raters who notice trapping instructions but rate at random.
  auto careless = sim::WorkerArchetype::defaults(sim::ArchetypeKind::spammer);
  careless.trapping_accuracy = 0.9;
  careless.playback_completion = 1.0;
  careless.earpods_accuracy = 0.98;
  careless.env_accuracy = 0.9;
  const auto spec = scenario::population(
      80, {{sim::WorkerArchetype::defaults(sim::ArchetypeKind::reliable), 0.6},
           {careless, 0.25},
           {sim::WorkerArchetype::defaults(sim::ArchetypeKind::noisy_env), 0.15}});

  std::vector<analysis::ScreenedRun> runs;
  for (std::uint64_t r = 0; r < 5; ++r) {
    auto opts = scenario::run_options(0.1 * static_cast<double>(r) - 0.2);
    opts.assignment_prefix = "r" + std::to_string(r + 1) + "-";
    const auto workers = sim::synthesize_population(spec, 500 + r);
    const auto p = scenario::run_pipeline(plan, config, workers, latent, opts, 900 + r);
    runs.push_back({p.batch.submissions, p.screening.verdicts});
  }
  const auto result = analysis::analyze_filters(runs, {"gold", "environment", "all"}, config);
  std::string detail;
  bool ok = false;
  for (const auto& c : result.criteria) {
    detail += c.criterion + ": ";
    if (c.skipped) {
      detail += "skipped (" + c.notice + ") ";
      continue;
    }
    detail += "PCC " + fmt(*c.passed.mean_pcc, 3) + " vs " + fmt(*c.failed.mean_pcc, 3);
    if (c.pcc_test) detail += std::string(" z=") + fmt(c.pcc_test->z_stat, 2) + (c.pcc_test->significant ? "*" : "");
    detail += " n=" + std::to_string(c.passed.conditions) + "/" + std::to_string(c.failed.conditions) + "; ";
    if (c.criterion == "gold") {
      ok = c.pcc_test && *c.passed.mean_pcc > *c.failed.mean_pcc && c.pcc_test->significant;
    }
  }
  return {ok, detail + "(gold must be higher for passed and significant at alpha=0.05)"};
}

Outcome truth_table() {
  const FilterToggles defaults;
  using cleansing::Criterion;
  std::size_t combos = 0, mismatches = 0;
  for (unsigned mask = 0; mask < (1u << 9); ++mask) {
    cleansing::CriterionFlags flags;
    for (std::size_t i = 0; i < cleansing::kAllCriteria.size(); ++i) {
      flags.set(cleansing::kAllCriteria[i], (mask >> i) & 1u ? cleansing::Flag::pass : cleansing::Flag::fail);
    }
    auto ok = [&](Criterion c) { return flags[c] == cleansing::Flag::pass; };
    const bool accepted = ok(Criterion::playback) && ok(Criterion::earpods) && ok(Criterion::trapping);
    const bool usable = accepted && ok(Criterion::environment) && ok(Criterion::gold) && ok(Criterion::variance) &&
                        ok(Criterion::qualification) && ok(Criterion::certificate_integrity);
    if (cleansing::accepted_from(flags, defaults) != accepted) ++mismatches;
    if (cleansing::usable_from(flags, defaults) != usable) ++mismatches;
    ++combos;
  }
  // The same rules must hold for every verdict produced on real data.
  std::size_t verdicts = 0;
  for (const auto& v : e2e().pipeline.screening.verdicts) {
    if (v.accepted != cleansing::accepted_from(v.criteria, defaults)) ++mismatches;
    if (v.ratings_usable != cleansing::usable_from(v.criteria, defaults)) ++mismatches;
    ++verdicts;
  }
  return {mismatches == 0 && combos == 512, std::to_string(combos) + " flag combinations, " +
                                                std::to_string(verdicts) + " simulated verdicts, " +
                                                std::to_string(mismatches) + " mismatches"};
}

// --- determinism ------------------------------------------------------------

std::map<std::string, std::string> library_outputs() {
  std::map<std::string, std::string> out;
  const auto config = scenario::acr_config();
  const auto clips = builder::load_clip_list(scenario::clip_list_csv(12, 5), config);
  const auto plan = builder::build_test_plan(clips, config, 99);
  out["plan.json"] = builder::plan_to_json(plan);
  const auto input = builder::emit_input_rows(plan);
  out["input.csv"] = csv::write(input, true);
  const auto bundle = builder::render_hit_app(config, scenario::kSecret, P808_TEMPLATE_DIR, input.header);
  for (const auto& [k, v] : bundle.files) out["hit_app/" + k] = v;
  const auto workers = sim::synthesize_population(
      scenario::population(40, {{sim::WorkerArchetype::defaults(sim::ArchetypeKind::reliable), 0.75},
                                {sim::WorkerArchetype::defaults(sim::ArchetypeKind::spammer), 0.25}}),
      3);
  const auto p = scenario::run_pipeline(plan, config, workers, scenario::spread_latent(12, 1.5, 4.5),
                                        scenario::run_options(), 4);
  out["answers.csv"] = p.answers_csv;
  out["verdicts.csv"] = cleansing::verdicts_csv(p.screening.verdicts);
  out["usable_ratings.csv"] = cleansing::ratings_csv(p.screening.usable_ratings);
  out["report.json"] = p.screening.report.to_json().dump();
  const auto agg = stats::aggregate(p.screening.usable_ratings, stats::GroupBy::condition);
  out["per_condition.csv"] = stats::aggregates_csv(agg.groups, "condition");
  return out;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) files[fs::relative(entry.path(), root).string()] = read_file(entry.path());
  }
  return files;
}

std::map<std::string, std::string> cli_outputs(const std::string& cli, const fs::path& work, const fs::path& out) {
  auto run = [](const std::string& cmd) {
    if (std::system((cmd + " > /dev/null").c_str()) != 0) throw std::runtime_error("command failed: " + cmd);
  };
  const std::string q = "'";
  run(cli + " build --clips " + q + (work / "clips.csv").string() + q + " --config " + q +
      (work / "config.json").string() + q + " --seed 17 --out " + q + (out / "build").string() + q);
  run(cli + " simulate --plan " + q + (out / "build").string() + q + " --population " + q +
      (work / "population.json").string() + q + " --latent " + q + (work / "latent.csv").string() + q +
      " --seed 23 --run-bias 0.2 --out " + q + (out / "answers.csv").string() + q);
  run(cli + " clean --answers " + q + (out / "answers.csv").string() + q + " --config " + q +
      (out / "build" / "postprocess_config.json").string() + q + " --out " + q + (out / "clean").string() + q);
  run(cli + " stats --ratings " + q + (out / "clean" / "usable_ratings.csv").string() + q +
      " --reference c01 --map-against " + q + (work / "latent.csv").string() + q + " --order 3 --out " + q +
      (out / "stats").string() + q);
  return read_tree(out);
}

Outcome determinism(const std::string& cli) {
  const auto a = library_outputs();
  const auto b = library_outputs();
  std::size_t compared = a.size();
  if (a != b) return {false, "library outputs differ between identical runs"};

  std::string detail = std::to_string(compared) + " library artifacts identical";
  if (!cli.empty()) {
    const fs::path work = fs::temp_directory_path() / ("p808-accept-" + std::to_string(::getpid()));
    fs::remove_all(work);
    fs::create_directories(work);
    write_file(work / "clips.csv", scenario::clip_list_csv(12, 5));
    write_file(work / "config.json", dump_config(scenario::acr_config()));
    std::string latent = "condition,latent\n";
    for (const auto& [c, v] : scenario::spread_latent(12, 1.5, 4.5)) latent += c + "," + format_double(v) + "\n";
    write_file(work / "latent.csv", latent);
    write_file(work / "population.json",
               R"({"size": 40, "archetypes": [{"kind": "reliable", "fraction": 0.75}, {"kind": "spammer", "fraction": 0.25}]})");
    const auto x = cli_outputs(cli, work, work / "run1");
    const auto y = cli_outputs(cli, work, work / "run2");
    fs::remove_all(work);
    if (x != y) {
      for (const auto& [k, v] : x) {
        if (!y.contains(k) || y.at(k) != v) return {false, "CLI output differs: " + k};
      }
      return {false, "CLI output file sets differ"};
    }
    detail += ", " + std::to_string(x.size()) + " CLI output files byte-identical";
  } else {
    detail += " (CLI path not given; CLI rerun skipped)";
  }
  return {true, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  report("stats-oracle-suite", stats_oracles);
  report("five-run-icc", five_run_icc);
  report("end-to-end-simulation", end_to_end);
  report("dmos-offset-invariance", dmos_offset_invariance);
  report("mapping-dominance", mapping_dominance);
  report("reproducibility", reproducibility);
  report("filter-impact-gold", filter_impact);
  report("cleansing-truth-table", truth_table);
  report("determinism", [&] { return determinism(cli); });
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
