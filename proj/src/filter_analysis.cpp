#include "p808/filter_analysis.hpp"

#include <algorithm>
#include <map>

#include "p808/error.hpp"

namespace p808::analysis {

namespace {

struct Group {
  std::size_t submissions = 0;
  std::vector<std::map<std::string, double>> per_run;
};

GroupReliability reliability(const Group& g, const ExperimentConfig& config) {
  GroupReliability out;
  out.submissions = g.submissions;
  const auto matrix = stats::build_run_matrix(g.per_run);
  out.conditions = matrix.rows();
  if (matrix.rows() < static_cast<std::size_t>(std::max(2, config.analysis.min_conditions))) return out;

  out.icc_mos = stats::icc_2_1(matrix).value;
  if (config.reference_condition &&
      std::find(matrix.targets.begin(), matrix.targets.end(), *config.reference_condition) !=
          matrix.targets.end()) {
    const auto dmos = stats::to_dmos(matrix, *config.reference_condition);
    if (dmos.rows() >= 2) out.icc_dmos = stats::icc_2_1(dmos).value;
  }
  out.mean_pcc = stats::mean_pairwise_pcc(matrix);
  out.mean_srcc = stats::mean_pairwise_srcc(matrix);
  return out;
}

std::optional<stats::FisherZResult> compare(std::optional<double> r1, std::size_t n1,
                                            std::optional<double> r2, std::size_t n2, double alpha,
                                            std::string& notice, const char* what) {
  if (!r1 || !r2) return std::nullopt;
  try {
    return stats::fisher_z_test(*r1, n1, *r2, n2, alpha);
  } catch (const StatsError& e) {
    if (!notice.empty()) notice += "; ";
    notice += std::string(what) + " test not computed: " + e.what();
    return std::nullopt;
  }
}

std::optional<cleansing::Criterion> parse_criterion(const std::string& name) {
  if (name == kAllCriteria) return std::nullopt;
  return cleansing::criterion_from_string(name);
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json group_json(const GroupReliability& g) {
  return {{"submissions", g.submissions},     {"conditions", g.conditions},
          {"icc_mos", optional_json(g.icc_mos)}, {"icc_dmos", optional_json(g.icc_dmos)},
          {"mean_pcc", optional_json(g.mean_pcc)}, {"mean_srcc", optional_json(g.mean_srcc)}};
}

nlohmann::json test_json(const std::optional<stats::FisherZResult>& t) {
  if (!t) return nullptr;
  return {{"z1", t->z1},         {"z2", t->z2},           {"z_stat", t->z_stat},
          {"critical", t->critical}, {"p_value", t->p_value}, {"significant", t->significant}};
}

}  // namespace

ScreenedRun screen_run(std::vector<ingest::Submission> submissions, const ExperimentConfig& config,
                       const std::string& secret) {
  ScreenedRun run;
  const auto histories = ingest::reconstruct_sessions(submissions);
  run.verdicts = cleansing::screen_batch(submissions, histories, config, secret).verdicts;
  run.submissions = std::move(submissions);
  return run;
}

FilterAnalysis analyze_filters(const std::vector<ScreenedRun>& runs, const std::vector<std::string>& criteria,
                               const ExperimentConfig& config) {
  if (runs.size() < 2) throw ValidationError("filter analysis needs at least two runs");
  std::vector<std::optional<cleansing::Criterion>> parsed;
  for (const auto& name : criteria) parsed.push_back(parse_criterion(name));

  const auto min_votes = static_cast<std::size_t>(std::max(1, config.analysis.min_votes_per_condition));

  FilterAnalysis out;
  out.runs = runs.size();
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    Group passed, failed;
    for (const auto& run : runs) {
      std::map<std::string, const ingest::Submission*> by_id;
      for (const auto& s : run.submissions) by_id.emplace(s.assignment_id, &s);

      std::vector<std::string> pass_ids, fail_ids;
      if (parsed[c]) {
        auto split = cleansing::split_by_criterion(run.verdicts, *parsed[c]);
        pass_ids = std::move(split.passed);
        fail_ids = std::move(split.failed);
      } else {
        for (const auto& v : run.verdicts) {
          if (!v.accepted) continue;
          (v.ratings_usable ? pass_ids : fail_ids).push_back(v.assignment_id);
        }
      }
      const auto collect = [&](const std::vector<std::string>& ids, Group& g) {
        std::vector<Rating> ratings;
        for (const auto& id : ids) {
          const auto it = by_id.find(id);
          if (it == by_id.end()) continue;
          ++g.submissions;
          ratings.insert(ratings.end(), it->second->ratings.begin(), it->second->ratings.end());
        }
        g.per_run.push_back(stats::condition_mos(ratings, min_votes));
      };
      collect(pass_ids, passed);
      collect(fail_ids, failed);
    }

    CriterionImpact impact;
    impact.criterion = criteria[c];
    impact.passed = reliability(passed, config);
    impact.failed = reliability(failed, config);
    if (failed.submissions == 0) {
      impact.skipped = true;
      impact.notice = "no submission failed this criterion";
    } else if (!impact.failed.mean_pcc || !impact.passed.mean_pcc) {
      impact.skipped = true;
      impact.notice = "not enough complete conditions in the " +
                      std::string(impact.failed.mean_pcc ? "passed" : "failed") + " group (have " +
                      std::to_string(impact.failed.mean_pcc ? impact.passed.conditions
                                                            : impact.failed.conditions) +
                      ", need " + std::to_string(config.analysis.min_conditions) + ")";
    } else {
      const bool by_submissions = config.analysis.fisher_n == "submissions";
      const auto n_passed = by_submissions ? impact.passed.submissions : impact.passed.conditions;
      const auto n_failed = by_submissions ? impact.failed.submissions : impact.failed.conditions;
      impact.pcc_test = compare(impact.passed.mean_pcc, n_passed, impact.failed.mean_pcc, n_failed,
                                config.analysis.alpha, impact.notice, "PCC");
      impact.srcc_test = compare(impact.passed.mean_srcc, n_passed, impact.failed.mean_srcc, n_failed,
                                 config.analysis.alpha, impact.notice, "SRCC");
    }
    out.criteria.push_back(std::move(impact));
  }
  return out;
}

nlohmann::json FilterAnalysis::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : criteria) {
    list.push_back({{"criterion", c.criterion},
                    {"skipped", c.skipped},
                    {"notice", c.notice},
                    {"passed", group_json(c.passed)},
                    {"failed", group_json(c.failed)},
                    {"pcc_test", test_json(c.pcc_test)},
                    {"srcc_test", test_json(c.srcc_test)}});
  }
  return {{"runs", runs}, {"criteria", list}};
}

}  // namespace p808::analysis
