#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "error.hpp"

namespace emcs {

const char* MetricName(Metric m) {
  switch (m) {
    case Metric::kAbsBias: return "abs_bias";
    case Metric::kMse: return "mse";
    case Metric::kVariance: return "variance";
  }
  return "unknown";
}

const std::vector<double>& PerformanceTable::Values(Metric m) const {
  switch (m) {
    case Metric::kAbsBias: return abs_bias;
    case Metric::kMse: return mse;
    case Metric::kVariance: return variance;
  }
  return mse;
}

namespace {

PerformanceTable Moments(const Eigen::MatrixXd& estimates,
                         const std::vector<double>& centre,
                         const std::vector<EstimatorId>& ids) {
  if (estimates.rows() < 2) {
    Fail(ErrorKind::kInvalidArgument, "performance table: need at least 2 replications");
  }
  if (static_cast<std::size_t>(estimates.cols()) != ids.size() ||
      centre.size() != ids.size()) {
    Fail(ErrorKind::kInvalidArgument, "performance table: dimension mismatch");
  }
  if (!estimates.allFinite()) {
    Fail(ErrorKind::kInvalidArgument, "performance table: non-finite estimate");
  }
  PerformanceTable t;
  t.estimators = ids;
  t.n_reps = estimates.rows();
  t.centre = centre;
  const double n = static_cast<double>(estimates.rows());
  for (Eigen::Index j = 0; j < estimates.cols(); ++j) {
    const auto col = estimates.col(j).array();
    const double c = centre[static_cast<std::size_t>(j)];
    const double mean = col.mean();
    t.abs_bias.push_back(std::abs(mean - c));
    t.variance.push_back((col - mean).square().sum() / n);
    t.mse.push_back((col - c).square().sum() / n);
  }
  return t;
}

}  // namespace

PerformanceTable PerformanceFromEstimates(const Eigen::MatrixXd& estimates,
                                          const TruthValue& truth,
                                          const std::vector<EstimatorId>& ids) {
  if (!std::isfinite(truth.att)) {
    Fail(ErrorKind::kInvalidArgument, "performance table: non-finite truth");
  }
  PerformanceTable t =
      Moments(estimates, std::vector<double>(ids.size(), truth.att), ids);
  t.truth = truth;
  return t;
}

PerformanceTable BootstrapPerformance(const Eigen::MatrixXd& boot_estimates,
                                      const Eigen::VectorXd& original_point_estimates,
                                      const std::vector<EstimatorId>& ids) {
  if (original_point_estimates.size() != boot_estimates.cols()) {
    Fail(ErrorKind::kInvalidArgument, "bootstrap performance: dimension mismatch");
  }
  std::vector<double> centre(original_point_estimates.data(),
                             original_point_estimates.data() + original_point_estimates.size());
  PerformanceTable t = Moments(boot_estimates, centre, ids);
  t.truth = {std::nan(""), TruthProvenance::kCentredOnPointEstimates};
  return t;
}

int ArgminSelection(const std::vector<double>& values) {
  return static_cast<int>(std::min_element(values.begin(), values.end()) - values.begin());
}

Ranking RankBy(const PerformanceTable& table, Metric metric) {
  const auto& v = table.Values(metric);
  Ranking r;
  r.metric = metric;
  r.ordering.resize(v.size());
  std::iota(r.ordering.begin(), r.ordering.end(), 0);
  std::stable_sort(r.ordering.begin(), r.ordering.end(),
                   [&](int a, int b) { return v[static_cast<std::size_t>(a)] <
                                              v[static_cast<std::size_t>(b)]; });
  return r;
}

namespace {

std::vector<int> PositionsOf(const std::vector<int>& ordering) {
  std::vector<int> rank(ordering.size(), -1);
  for (std::size_t pos = 0; pos < ordering.size(); ++pos) {
    const int j = ordering[pos];
    if (j < 0 || static_cast<std::size_t>(j) >= ordering.size() ||
        rank[static_cast<std::size_t>(j)] != -1) {
      Fail(ErrorKind::kInvalidArgument, "ranking is not a permutation");
    }
    rank[static_cast<std::size_t>(j)] = static_cast<int>(pos);
  }
  return rank;
}

}  // namespace

double KendallsTau(const std::vector<int>& ordering_a, const std::vector<int>& ordering_b) {
  if (ordering_a.size() != ordering_b.size() || ordering_a.size() < 2) {
    Fail(ErrorKind::kInvalidArgument, "kendall's tau: rankings differ in size");
  }
  const auto ra = PositionsOf(ordering_a);
  const auto rb = PositionsOf(ordering_b);
  long concordant = 0;
  long discordant = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    for (std::size_t j = i + 1; j < ra.size(); ++j) {
      const long s = static_cast<long>(ra[i] - ra[j]) * (rb[i] - rb[j]);
      if (s > 0) ++concordant;
      if (s < 0) ++discordant;
    }
  }
  const double pairs = static_cast<double>(ra.size() * (ra.size() - 1) / 2);
  return static_cast<double>(concordant - discordant) / pairs;
}

double KendallsTau(const Ranking& truth, const Ranking& estimate) {
  return KendallsTau(truth.ordering, estimate.ordering);
}

double Regret(const PerformanceTable& true_table, int selected, Metric metric) {
  const auto& v = true_table.Values(metric);
  if (selected < 0 || static_cast<std::size_t>(selected) >= v.size()) {
    Fail(ErrorKind::kInvalidArgument, "regret: selected index out of range");
  }
  return v[static_cast<std::size_t>(selected)] - *std::min_element(v.begin(), v.end());
}

double RandomExpectedRegret(const PerformanceTable& true_table, Metric metric) {
  const auto& v = true_table.Values(metric);
  if (v.size() < 2) {
    Fail(ErrorKind::kInvalidArgument, "random expected regret: need J >= 2");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    sum += Regret(true_table, static_cast<int>(j), metric);
  }
  return sum / static_cast<double>(v.size());
}

std::optional<double> PearsonCorrelation(const std::vector<double>& a,
                                         const std::vector<double>& b) {
  if (a.size() != b.size()) {
    Fail(ErrorKind::kInvalidArgument, "correlation: length mismatch");
  }
  if (a.size() < 3) return std::nullopt;
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

namespace {

double CloserFraction(const std::vector<double>& e1, const std::vector<double>& e2,
                      bool strict) {
  if (e1.size() != e2.size() || e1.empty()) {
    Fail(ErrorKind::kInvalidArgument, "prob_closer: length mismatch");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < e1.size(); ++i) {
    const double a = std::abs(e1[i]);
    const double b = std::abs(e2[i]);
    hits += (strict ? a < b : a <= b) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(e1.size());
}

}  // namespace

double ProbCloser(const std::vector<double>& errors1, const std::vector<double>& errors2) {
  return CloserFraction(errors1, errors2, false);
}

double ProbCloserStrict(const std::vector<double>& errors1,
                        const std::vector<double>& errors2) {
  return CloserFraction(errors1, errors2, true);
}

SelectionRecord ScoreSelection(const PerformanceTable& true_table,
                               const PerformanceTable& design_table, Metric metric) {
  if (true_table.estimators != design_table.estimators) {
    Fail(ErrorKind::kInvalidArgument, "selection: estimator sets differ");
  }
  SelectionRecord r;
  const Ranking truth = RankBy(true_table, metric);
  const Ranking est = RankBy(design_table, metric);
  r.selected = est.ordering.front();
  r.true_best = truth.ordering.front();
  r.regret = Regret(true_table, r.selected, metric);
  r.kendall_tau = KendallsTau(truth, est);
  r.correlation = PearsonCorrelation(true_table.Values(metric), design_table.Values(metric));
  return r;
}

SelectionRecord ScoreRandomSelection(const PerformanceTable& true_table,
                                     const std::vector<int>& ranking, Metric metric) {
  SelectionRecord r;
  const Ranking truth = RankBy(true_table, metric);
  r.selected = ranking.front();
  r.true_best = truth.ordering.front();
  r.regret = Regret(true_table, r.selected, metric);
  r.kendall_tau = KendallsTau(truth.ordering, ranking);
  return r;
}

namespace {

void FillRegretRatios(ValidityRow& row, const PerformanceTable& true_table) {
  const auto& v = true_table.Values(row.metric);
  const double min_value = *std::min_element(v.begin(), v.end());
  const double random_regret = RandomExpectedRegret(true_table, row.metric);
  if (min_value > 0.0) row.avg_regret_pct_of_min = 100.0 * row.avg_regret / min_value;
  if (random_regret > 0.0) {
    row.avg_regret_pct_of_random = 100.0 * row.avg_regret / random_regret;
  }
}

}  // namespace

ValidityRow AggregateRecords(DesignKind design, Metric metric,
                             const PerformanceTable& true_table,
                             const std::vector<SelectionRecord>& records) {
  if (records.empty()) {
    Fail(ErrorKind::kInvalidArgument, "aggregate validity: no sample records");
  }
  ValidityRow row;
  row.design = design;
  row.metric = metric;
  row.n_samples = static_cast<int>(records.size());
  double hits = 0.0, regret = 0.0, tau = 0.0, corr = 0.0;
  int n_corr = 0;
  for (const auto& r : records) {
    hits += r.selected == r.true_best ? 1.0 : 0.0;
    regret += r.regret;
    tau += r.kendall_tau;
    if (r.correlation) {
      corr += *r.correlation;
      ++n_corr;
    } else {
      ++row.correlations_missing;
    }
  }
  const double n = static_cast<double>(records.size());
  row.selection_rate = hits / n;
  row.avg_regret = regret / n;
  row.avg_kendall_tau = tau / n;
  if (n_corr > 0) row.avg_correlation = corr / n_corr;
  FillRegretRatios(row, true_table);
  return row;
}

ValidityRow AnalyticRandomRow(const PerformanceTable& true_table, Metric metric,
                              int n_samples) {
  ValidityRow row;
  row.design = DesignKind::kRandom;
  row.metric = metric;
  row.n_samples = n_samples;
  row.selection_rate = 1.0 / static_cast<double>(true_table.size());
  row.avg_regret = RandomExpectedRegret(true_table, metric);
  row.avg_kendall_tau = 0.0;
  row.correlations_missing = n_samples;
  FillRegretRatios(row, true_table);
  return row;
}

ValidityReport AggregateValidity(
    const PerformanceTable& true_table,
    const std::vector<std::pair<DesignKind, std::vector<PerformanceTable>>>& per_design,
    bool include_random, int random_n_samples) {
  if (per_design.empty() && !include_random) {
    Fail(ErrorKind::kInvalidArgument, "aggregate validity: no designs");
  }
  ValidityReport report;
  for (const auto& [design, tables] : per_design) {
    for (Metric m : kAllMetrics) {
      std::vector<SelectionRecord> records;
      records.reserve(tables.size());
      for (const auto& t : tables) records.push_back(ScoreSelection(true_table, t, m));
      report.rows.push_back(AggregateRecords(design, m, true_table, records));
    }
  }
  if (include_random) {
    for (Metric m : kAllMetrics) {
      report.rows.push_back(AnalyticRandomRow(true_table, m, random_n_samples));
    }
  }
  return report;
}

}  // namespace emcs
