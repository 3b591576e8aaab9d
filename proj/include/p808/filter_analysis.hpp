#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "p808/cleansing.hpp"
#include "p808/config.hpp"
#include "p808/ingest.hpp"
#include "p808/stats.hpp"

namespace p808::analysis {

// One screened run: its submissions and the matching verdicts.
struct ScreenedRun {
  std::vector<ingest::Submission> submissions;
  std::vector<cleansing::CleansingVerdict> verdicts;
};

ScreenedRun screen_run(std::vector<ingest::Submission> submissions, const ExperimentConfig& config,
                       const std::string& secret);

// Pseudo-criterion comparing usable submissions against accepted but unusable ones.
inline constexpr const char* kAllCriteria = "all";

struct GroupReliability {
  std::size_t submissions = 0;  // summed over runs
  std::size_t conditions = 0;   // complete conditions in the run matrix
  std::optional<double> icc_mos;
  std::optional<double> icc_dmos;
  std::optional<double> mean_pcc;
  std::optional<double> mean_srcc;
};

struct CriterionImpact {
  std::string criterion;
  bool skipped = false;
  std::string notice;
  GroupReliability passed;
  GroupReliability failed;
  std::optional<stats::FisherZResult> pcc_test;
  std::optional<stats::FisherZResult> srcc_test;
};

struct FilterAnalysis {
  std::size_t runs = 0;
  std::vector<CriterionImpact> criteria;

  nlohmann::json to_json() const;
};

// Splits the accepted submissions of every run by each criterion, builds
// per-run condition MOS for both groups and compares their reliability.
// Fisher-z uses the number of complete conditions as n unless
// analysis.fisher_n selects submissions. Throws
// ValidationError for fewer than two runs or an unknown criterion name.
FilterAnalysis analyze_filters(const std::vector<ScreenedRun>& runs,
                               const std::vector<std::string>& criteria,
                               const ExperimentConfig& config);

}  // namespace p808::analysis
