#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "p808/types.hpp"

namespace p808::stats {

enum class GroupBy { stimulus, condition };

// One opinion value under a grouping key.
struct Observation {
  std::string key;
  double value = 0.0;
};

// MOS with sample standard deviation and Student-t 95% confidence half-width.
// sd and ci95 are undefined for a single vote.
struct Aggregate {
  std::string key;
  double mos = 0.0;
  std::optional<double> sd;
  std::size_t n = 0;
  std::optional<double> ci95;
};

struct AggregationResult {
  std::vector<Aggregate> groups;  // sorted by key
  std::vector<std::string> warnings;
};

double student_t_quantile(double p, double degrees_of_freedom);
double normal_quantile(double p);

Aggregate summarize(std::string key, std::span<const double> values);

// Groups with fewer than `min_votes` values are omitted with a warning.
AggregationResult aggregate(std::span<const Observation> observations, std::size_t min_votes = 1);
// Ratings lacking a condition are skipped (with a warning) when grouping by condition.
AggregationResult aggregate(const std::vector<Rating>& ratings, GroupBy group_by,
                            std::size_t min_votes = 1);

std::vector<Observation> observations(const std::vector<Rating>& ratings, GroupBy group_by);

struct KeyedScore {
  std::string key;
  double value = 0.0;
};

// MOS(condition) - MOS(reference); the reference itself maps to 0.
// Throws ValidationError when the reference is absent.
std::vector<KeyedScore> dmos(const std::vector<Aggregate>& condition_aggregates,
                             std::string_view reference_label);

// CCR rating expressed as "processed relative to reference": negated when the
// reference was played second. Throws ValidationError without an order flag.
double normalized_ccr(const Rating& rating);
// Per-group mean of normalized CCR ratings (with sd/ci like aggregate()).
AggregationResult cmos(const std::vector<Rating>& ratings, GroupBy group_by = GroupBy::condition,
                       std::size_t min_votes = 1);

// Product-moment correlation. Throws StatsError on length mismatch, fewer than
// three points, or zero variance.
double pcc(std::span<const double> x, std::span<const double> y);
// Average (fractional) ranks, 1-based.
std::vector<double> fractional_ranks(std::span<const double> v);
double srcc(std::span<const double> x, std::span<const double> y);
double rmse(std::span<const double> x, std::span<const double> y);

// Least-squares polynomial y ~ p(x). coefficients[i] multiplies x^i.
struct MappingModel {
  int order = 1;
  std::vector<double> coefficients;
  double fit_rmse = 0.0;

  double operator()(double x) const;
  std::vector<double> apply(std::span<const double> x) const;
};

// Throws StatsError on order not in {1, 3}, too few points, or rank deficiency.
MappingModel fit_mapping(std::span<const double> x, std::span<const double> y, int order);

// rows = targets (conditions), columns = runs.
struct RunMatrix {
  std::vector<std::string> targets;
  std::vector<std::string> runs;
  std::vector<std::vector<double>> cells;

  std::size_t rows() const { return cells.size(); }
  std::size_t cols() const { return cells.empty() ? 0 : cells.front().size(); }
  std::vector<double> column(std::size_t j) const;
};

struct IccResult {
  double value = 0.0;
  bool degenerate = false;  // zero denominator (all cells equal); value reported as 0
  double ms_rows = 0.0;
  double ms_cols = 0.0;
  double ms_error = 0.0;
};

// ICC(2,1): two-way random effects, absolute agreement, single measures.
// Throws ValidationError on an incomplete or too small matrix.
IccResult icc_2_1(const RunMatrix& matrix);

struct FisherZResult {
  double z1 = 0.0;
  double z2 = 0.0;
  double z_stat = 0.0;
  double critical = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

// Compares two independent correlations via atanh. Throws StatsError when
// |r| >= 1 or n < 4.
FisherZResult fisher_z_test(double r1, std::size_t n1, double r2, std::size_t n2, double alpha = 0.05);

// Condition -> MOS for one run; conditions with fewer than `min_votes` ratings are dropped.
std::map<std::string, double> condition_mos(const std::vector<Rating>& ratings, std::size_t min_votes = 1);

// Keeps targets present in every run, in lexicographic order.
RunMatrix build_run_matrix(const std::vector<std::map<std::string, double>>& runs);

// Subtracts each run's reference row and drops it. Throws ValidationError when absent.
RunMatrix to_dmos(const RunMatrix& mos, std::string_view reference_label);

// Mean of pcc (or srcc) over all column pairs; pairs with undefined correlation are skipped.
std::optional<double> mean_pairwise_pcc(const RunMatrix& m);
std::optional<double> mean_pairwise_srcc(const RunMatrix& m);

struct ResampleOptions {
  std::size_t votes_per_condition = 0;
  std::size_t repeats = 10;
  int order = 1;
  std::uint64_t seed = 0;
};

struct ResampleResult {
  std::size_t conditions = 0;
  std::vector<std::string> dropped;  // fewer votes than requested or no reference score
  double pcc = 0.0;
  double srcc = 0.0;
  double rmse = 0.0;
  double mapped_rmse = 0.0;
};

// Draws `votes_per_condition` votes per condition uniformly without replacement,
// compares the resulting MOS with `reference`, and averages over the repeats.
// Throws ValidationError on zero votes or repeats.
ResampleResult resampled_comparison(std::span<const Observation> observations,
                                    const std::map<std::string, double>& reference,
                                    const ResampleOptions& options);

std::string aggregates_csv(const std::vector<Aggregate>& groups, std::string_view key_name);

}  // namespace p808::stats
