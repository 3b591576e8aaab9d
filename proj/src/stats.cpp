#include "p808/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "p808/csv.hpp"
#include "p808/error.hpp"
#include "p808/numfmt.hpp"
#include "p808/rng.hpp"

namespace p808::stats {

namespace {

void require_pair(std::span<const double> x, std::span<const double> y, std::size_t min_n) {
  if (x.size() != y.size()) {
    throw StatsError("length mismatch: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  }
  if (x.size() < min_n) {
    throw StatsError("need at least " + std::to_string(min_n) + " points, got " + std::to_string(x.size()));
  }
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::optional<double> mean_pairwise(const RunMatrix& m,
                                    double (*corr)(std::span<const double>, std::span<const double>)) {
  double sum = 0;
  std::size_t count = 0;
  for (std::size_t a = 0; a < m.cols(); ++a) {
    const auto ca = m.column(a);
    for (std::size_t b = a + 1; b < m.cols(); ++b) {
      try {
        sum += corr(ca, m.column(b));
        ++count;
      } catch (const StatsError&) {
      }
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

}  // namespace

double student_t_quantile(double p, double degrees_of_freedom) {
  return boost::math::quantile(boost::math::students_t(degrees_of_freedom), p);
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

Aggregate summarize(std::string key, std::span<const double> values) {
  Aggregate a;
  a.key = std::move(key);
  a.n = values.size();
  if (values.empty()) return a;
  a.mos = mean(values);
  if (a.n >= 2) {
    double ss = 0;
    for (double v : values) ss += (v - a.mos) * (v - a.mos);
    a.sd = std::sqrt(ss / static_cast<double>(a.n - 1));
    a.ci95 = student_t_quantile(0.975, static_cast<double>(a.n - 1)) * *a.sd /
             std::sqrt(static_cast<double>(a.n));
  }
  return a;
}

AggregationResult aggregate(std::span<const Observation> obs, std::size_t min_votes) {
  std::map<std::string, std::vector<double>> groups;
  for (const auto& o : obs) groups[o.key].push_back(o.value);
  AggregationResult out;
  for (auto& [key, values] : groups) {
    if (values.size() < min_votes) {
      out.warnings.push_back("group '" + key + "' has " + std::to_string(values.size()) +
                             " votes (< " + std::to_string(min_votes) + "); omitted");
      continue;
    }
    out.groups.push_back(summarize(key, values));
  }
  return out;
}

std::vector<Observation> observations(const std::vector<Rating>& ratings, GroupBy group_by) {
  std::vector<Observation> out;
  out.reserve(ratings.size());
  for (const auto& r : ratings) {
    if (group_by == GroupBy::stimulus) {
      out.push_back({r.stimulus_id, static_cast<double>(r.value)});
    } else if (r.condition) {
      out.push_back({*r.condition, static_cast<double>(r.value)});
    }
  }
  return out;
}

AggregationResult aggregate(const std::vector<Rating>& ratings, GroupBy group_by, std::size_t min_votes) {
  const auto obs = observations(ratings, group_by);
  auto out = aggregate(obs, min_votes);
  if (obs.size() != ratings.size()) {
    out.warnings.push_back(std::to_string(ratings.size() - obs.size()) +
                           " ratings without a condition were skipped");
  }
  return out;
}

std::vector<KeyedScore> dmos(const std::vector<Aggregate>& condition_aggregates,
                             std::string_view reference_label) {
  const auto ref = std::find_if(condition_aggregates.begin(), condition_aggregates.end(),
                                [&](const Aggregate& a) { return a.key == reference_label; });
  if (ref == condition_aggregates.end()) {
    throw ValidationError("reference condition '" + std::string(reference_label) + "' not found");
  }
  std::vector<KeyedScore> out;
  out.reserve(condition_aggregates.size());
  for (const auto& a : condition_aggregates) {
    out.push_back({a.key, a.key == reference_label ? 0.0 : a.mos - ref->mos});
  }
  return out;
}

double normalized_ccr(const Rating& rating) {
  if (!rating.presentation_order) {
    throw ValidationError("CCR rating of '" + rating.stimulus_id + "' lacks a presentation order");
  }
  return *rating.presentation_order == PresentationOrder::reference_first ? rating.value
                                                                          : -rating.value;
}

AggregationResult cmos(const std::vector<Rating>& ratings, GroupBy group_by, std::size_t min_votes) {
  std::vector<Observation> obs;
  std::size_t skipped = 0;
  for (const auto& r : ratings) {
    const double v = normalized_ccr(r);
    if (group_by == GroupBy::stimulus) {
      obs.push_back({r.stimulus_id, v});
    } else if (r.condition) {
      obs.push_back({*r.condition, v});
    } else {
      ++skipped;
    }
  }
  auto out = aggregate(obs, min_votes);
  if (skipped) out.warnings.push_back(std::to_string(skipped) + " ratings without a condition were skipped");
  return out;
}

double pcc(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y, 3);
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw StatsError("correlation undefined for zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> fractional_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double srcc(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y, 3);
  const auto rx = fractional_ranks(x);
  const auto ry = fractional_ranks(y);
  return pcc(rx, ry);
}

double rmse(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y, 1);
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) ss += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

double MappingModel::operator()(double x) const {
  double acc = 0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
  return acc;
}

std::vector<double> MappingModel::apply(std::span<const double> x) const {
  std::vector<double> out;
  out.reserve(x.size());
  for (double v : x) out.push_back((*this)(v));
  return out;
}

MappingModel fit_mapping(std::span<const double> x, std::span<const double> y, int order) {
  if (order != 1 && order != 3) throw StatsError("mapping order must be 1 or 3");
  const auto terms = static_cast<std::size_t>(order + 1);
  require_pair(x, y, terms);

  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd design(n, static_cast<Eigen::Index>(terms));
  Eigen::VectorXd target(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = 1.0;
    for (std::size_t k = 0; k < terms; ++k) {
      design(i, static_cast<Eigen::Index>(k)) = p;
      p *= x[static_cast<std::size_t>(i)];
    }
    target(i) = y[static_cast<std::size_t>(i)];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < static_cast<Eigen::Index>(terms)) {
    throw StatsError("rank-deficient mapping fit (need " + std::to_string(terms) + " distinct x values)");
  }
  const Eigen::VectorXd coef = qr.solve(target);

  MappingModel model;
  model.order = order;
  model.coefficients.assign(coef.data(), coef.data() + coef.size());
  model.fit_rmse = rmse(model.apply(x), y);
  return model;
}

std::vector<double> RunMatrix::column(std::size_t j) const {
  std::vector<double> out;
  out.reserve(rows());
  for (const auto& row : cells) out.push_back(row.at(j));
  return out;
}

IccResult icc_2_1(const RunMatrix& m) {
  const std::size_t n = m.rows();
  const std::size_t k = m.cols();
  if (n < 2 || k < 2) throw ValidationError("ICC needs at least 2 targets and 2 runs");
  for (const auto& row : m.cells) {
    if (row.size() != k) throw ValidationError("ICC needs a complete matrix");
    for (double v : row) {
      if (!std::isfinite(v)) throw ValidationError("ICC needs a complete matrix");
    }
  }
  const double nd = static_cast<double>(n);
  const double kd = static_cast<double>(k);

  double grand = 0;
  std::vector<double> row_mean(n, 0.0), col_mean(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      grand += m.cells[i][j];
      row_mean[i] += m.cells[i][j];
      col_mean[j] += m.cells[i][j];
    }
  }
  grand /= nd * kd;
  for (auto& r : row_mean) r /= kd;
  for (auto& c : col_mean) c /= nd;

  double ss_rows = 0, ss_cols = 0, ss_total = 0;
  for (double r : row_mean) ss_rows += (r - grand) * (r - grand);
  ss_rows *= kd;
  for (double c : col_mean) ss_cols += (c - grand) * (c - grand);
  ss_cols *= nd;
  for (const auto& row : m.cells) {
    for (double v : row) ss_total += (v - grand) * (v - grand);
  }
  const double ss_error = std::max(0.0, ss_total - ss_rows - ss_cols);

  IccResult out;
  out.ms_rows = ss_rows / (nd - 1);
  out.ms_cols = ss_cols / (kd - 1);
  out.ms_error = ss_error / ((nd - 1) * (kd - 1));
  const double denom = out.ms_rows + (kd - 1) * out.ms_error + (kd / nd) * (out.ms_cols - out.ms_error);
  if (std::abs(denom) <= 1e-300) {
    out.degenerate = true;
    out.value = 0.0;
    return out;
  }
  out.value = (out.ms_rows - out.ms_error) / denom;
  return out;
}

FisherZResult fisher_z_test(double r1, std::size_t n1, double r2, std::size_t n2, double alpha) {
  if (!(std::abs(r1) < 1.0) || !(std::abs(r2) < 1.0)) {
    throw StatsError("Fisher z transform undefined for |r| >= 1");
  }
  if (n1 < 4 || n2 < 4) throw StatsError("Fisher z test needs n >= 4 in both groups");
  if (!(alpha > 0 && alpha < 1)) throw StatsError("alpha must lie in (0, 1)");
  FisherZResult out;
  out.z1 = std::atanh(r1);
  out.z2 = std::atanh(r2);
  const double se = std::sqrt(1.0 / static_cast<double>(n1 - 3) + 1.0 / static_cast<double>(n2 - 3));
  out.z_stat = (out.z1 - out.z2) / se;
  out.critical = normal_quantile(1.0 - alpha / 2.0);
  out.p_value = 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal(), std::abs(out.z_stat)));
  out.significant = std::abs(out.z_stat) > out.critical;
  return out;
}

std::map<std::string, double> condition_mos(const std::vector<Rating>& ratings, std::size_t min_votes) {
  std::map<std::string, double> out;
  for (const auto& a : aggregate(ratings, GroupBy::condition, min_votes).groups) out[a.key] = a.mos;
  return out;
}

RunMatrix build_run_matrix(const std::vector<std::map<std::string, double>>& runs) {
  RunMatrix m;
  for (std::size_t j = 0; j < runs.size(); ++j) m.runs.push_back("run" + std::to_string(j + 1));
  if (runs.empty()) return m;
  for (const auto& [target, v] : runs.front()) {
    std::vector<double> row;
    row.reserve(runs.size());
    for (const auto& run : runs) {
      const auto it = run.find(target);
      if (it == run.end()) break;
      row.push_back(it->second);
    }
    if (row.size() != runs.size()) continue;
    m.targets.push_back(target);
    m.cells.push_back(std::move(row));
  }
  return m;
}

RunMatrix to_dmos(const RunMatrix& mos, std::string_view reference_label) {
  const auto it = std::find(mos.targets.begin(), mos.targets.end(), reference_label);
  if (it == mos.targets.end()) {
    throw ValidationError("reference condition '" + std::string(reference_label) + "' not in matrix");
  }
  const auto ref = static_cast<std::size_t>(it - mos.targets.begin());
  RunMatrix out;
  out.runs = mos.runs;
  for (std::size_t i = 0; i < mos.rows(); ++i) {
    if (i == ref) continue;
    std::vector<double> row(mos.cols());
    for (std::size_t j = 0; j < mos.cols(); ++j) row[j] = mos.cells[i][j] - mos.cells[ref][j];
    out.targets.push_back(mos.targets[i]);
    out.cells.push_back(std::move(row));
  }
  return out;
}

std::optional<double> mean_pairwise_pcc(const RunMatrix& m) {
  return mean_pairwise(m, [](std::span<const double> a, std::span<const double> b) { return pcc(a, b); });
}

std::optional<double> mean_pairwise_srcc(const RunMatrix& m) {
  return mean_pairwise(m, [](std::span<const double> a, std::span<const double> b) { return srcc(a, b); });
}

ResampleResult resampled_comparison(std::span<const Observation> observations,
                                    const std::map<std::string, double>& reference,
                                    const ResampleOptions& options) {
  if (options.votes_per_condition == 0) throw ValidationError("votes per condition must be positive");
  if (options.repeats == 0) throw ValidationError("repeats must be positive");
  std::map<std::string, std::vector<double>> votes;
  for (const auto& o : observations) votes[o.key].push_back(o.value);

  ResampleResult out;
  std::vector<std::vector<double>*> pools;
  std::vector<double> target;
  for (auto& [key, v] : votes) {
    const auto it = reference.find(key);
    if (it == reference.end() || v.size() < options.votes_per_condition) {
      out.dropped.push_back(key);
      continue;
    }
    pools.push_back(&v);
    target.push_back(it->second);
  }
  out.conditions = pools.size();

  const auto n = options.votes_per_condition;
  for (std::size_t r = 0; r < options.repeats; ++r) {
    Rng rng(derive_seed(options.seed, 0x7265, r));
    std::vector<double> mos;
    mos.reserve(pools.size());
    for (auto* pool : pools) {
      // Partial Fisher-Yates: the first n entries become a uniform sample.
      auto& v = *pool;
      for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, v.size() - 1);
        std::swap(v[i], v[pick(rng)]);
      }
      mos.push_back(std::accumulate(v.begin(), v.begin() + static_cast<long>(n), 0.0) / static_cast<double>(n));
    }
    out.pcc += pcc(mos, target);
    out.srcc += srcc(mos, target);
    out.rmse += rmse(mos, target);
    out.mapped_rmse += fit_mapping(mos, target, options.order).fit_rmse;
  }
  const auto k = static_cast<double>(options.repeats);
  out.pcc /= k;
  out.srcc /= k;
  out.rmse /= k;
  out.mapped_rmse /= k;
  return out;
}

std::string aggregates_csv(const std::vector<Aggregate>& groups, std::string_view key_name) {
  csv::Table t;
  t.header = {std::string(key_name), "mos", "sd", "n", "ci95"};
  for (const auto& g : groups) {
    t.rows.push_back({g.key, format_double(g.mos), g.sd ? format_double(*g.sd) : "",
                      std::to_string(g.n), g.ci95 ? format_double(*g.ci95) : ""});
  }
  return csv::write(t);
}

}  // namespace p808::stats
