#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "designs.hpp"
#include "estimators.hpp"
#include "sample.hpp"

namespace emcs {

enum class Metric { kAbsBias = 0, kMse = 1, kVariance = 2 };

inline constexpr std::array<Metric, 3> kAllMetrics = {Metric::kAbsBias, Metric::kMse,
                                                      Metric::kVariance};

const char* MetricName(Metric m);

// Moments of each estimator's draws about a reference value. Variance uses
// the divide-by-n convention, so mse = abs_bias^2 + variance.
struct PerformanceTable {
  std::vector<EstimatorId> estimators;
  std::vector<double> abs_bias;
  std::vector<double> variance;
  std::vector<double> mse;
  Eigen::Index n_reps = 0;
  TruthValue truth;
  // Reference value per estimator: the truth, or the original-sample point
  // estimate for bootstrap tables.
  std::vector<double> centre;

  std::size_t size() const { return estimators.size(); }
  const std::vector<double>& Values(Metric m) const;
};

// `estimates` is reps x J; column j belongs to ids[j].
PerformanceTable PerformanceFromEstimates(const Eigen::MatrixXd& estimates,
                                          const TruthValue& truth,
                                          const std::vector<EstimatorId>& ids);

// Each column is centred on its own original-sample point estimate.
PerformanceTable BootstrapPerformance(const Eigen::MatrixXd& boot_estimates,
                                      const Eigen::VectorXd& original_point_estimates,
                                      const std::vector<EstimatorId>& ids);

// Column positions, best (smallest metric) first; exact ties by position.
struct Ranking {
  std::vector<int> ordering;
  Metric metric = Metric::kMse;
};

Ranking RankBy(const PerformanceTable& table, Metric metric);
int ArgminSelection(const std::vector<double>& values);

// (concordant - discordant) / (J(J-1)/2).
double KendallsTau(const Ranking& truth, const Ranking& estimate);
double KendallsTau(const std::vector<int>& ordering_a, const std::vector<int>& ordering_b);

double Regret(const PerformanceTable& true_table, int selected, Metric metric);
// Expected regret of picking an estimator uniformly at random.
double RandomExpectedRegret(const PerformanceTable& true_table, Metric metric);

// Missing when either side has zero variance or fewer than 3 entries.
std::optional<double> PearsonCorrelation(const std::vector<double>& a,
                                         const std::vector<double>& b);

// Fraction of paired replications with |e1| <= |e2|.
double ProbCloser(const std::vector<double>& errors1, const std::vector<double>& errors2);
// Same with strict <.
double ProbCloserStrict(const std::vector<double>& errors1,
                        const std::vector<double>& errors2);

// Per-sample outcome of one design under one metric.
struct SelectionRecord {
  int selected = 0;
  int true_best = 0;
  double regret = 0.0;
  double kendall_tau = 0.0;
  std::optional<double> correlation;
};

SelectionRecord ScoreSelection(const PerformanceTable& true_table,
                               const PerformanceTable& design_table, Metric metric);
// Random design: the ranking is drawn, not estimated.
SelectionRecord ScoreRandomSelection(const PerformanceTable& true_table,
                                     const std::vector<int>& ranking, Metric metric);

struct ValidityRow {
  DesignKind design = DesignKind::kPlacebo;
  Metric metric = Metric::kMse;
  double selection_rate = 0.0;
  double avg_regret = 0.0;
  std::optional<double> avg_regret_pct_of_min;
  std::optional<double> avg_regret_pct_of_random;
  double avg_kendall_tau = 0.0;
  std::optional<double> avg_correlation;
  int correlations_missing = 0;
  int n_samples = 0;
};

struct ValidityReport {
  std::vector<ValidityRow> rows;
};

// Averages per-sample tables of each design against the pooled truth. When
// `include_random` is set, a random-selection row with its analytic values
// is appended for each metric.
ValidityReport AggregateValidity(
    const PerformanceTable& true_table,
    const std::vector<std::pair<DesignKind, std::vector<PerformanceTable>>>& per_design,
    bool include_random, int random_n_samples = 0);

ValidityRow AggregateRecords(DesignKind design, Metric metric,
                             const PerformanceTable& true_table,
                             const std::vector<SelectionRecord>& records);
ValidityRow AnalyticRandomRow(const PerformanceTable& true_table, Metric metric,
                              int n_samples);

}  // namespace emcs
