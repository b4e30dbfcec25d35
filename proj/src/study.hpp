#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "config.hpp"
#include "metrics.hpp"

namespace emcs {

struct ReplicateFailure {
  int rep_idx = 0;
  std::string kind;
  std::string message;
};

// One design's replications on one original sample.
struct DesignSlice {
  DesignKind design = DesignKind::kPlacebo;
  // Effective reps x J; row r came from replicate rep_idx[r].
  Eigen::MatrixXd estimates;
  std::vector<int> rep_idx;
  std::vector<double> truths;  // per effective replicate
  std::vector<ReplicateFailure> failures;
  std::optional<PerformanceTable> table;  // absent for the random design
  std::vector<int> random_ranking;        // random design only
  // Filled once the pooled truth is known, one per metric.
  std::array<SelectionRecord, 3> selections{};
};

struct SampleRecord {
  int sample_idx = 0;
  Eigen::VectorXd point_estimates;  // J, the original-sample estimates
  std::optional<double> bandwidth;  // cached kernel-matching bandwidth
  std::vector<DesignSlice> designs;
  std::int64_t estimator_invocations = 0;
};

struct PathAllocation {
  Purpose purpose = Purpose::kOriginalSample;
  int sample_begin = 0;
  int sample_end = 0;  // exclusive
  int rep_begin = 0;
  int rep_end = 0;  // exclusive
  std::string note;
};

struct StudyRecord {
  RunConfig config;
  TruthValue truth;
  // Truth samples x J point estimates behind the pooled true table.
  Eigen::MatrixXd truth_estimates;
  PerformanceTable true_table;
  std::vector<SampleRecord> samples;  // the EMCS originals, by index
  ValidityReport report;
  std::vector<PathAllocation> paths;

  std::int64_t replications_attempted = 0;
  std::int64_t replications_failed = 0;
  std::int64_t estimator_invocations = 0;
  int workers = 1;
  double seconds_truth = 0.0;
  double seconds_designs = 0.0;
  double seconds_total = 0.0;
};

// Original sample `sample_idx` (scenario draw or dataset subsample).
Sample OriginalSample(const RunConfig& cfg, int sample_idx, const Sample* population);

// Steps 2-4 for one sample: point estimates, then every configured design's
// replications and tables. Selections are left empty (they need the pooled
// truth). Pure given (sample, cfg, sample_idx).
SampleRecord RunSingleSample(const Sample& original, const RunConfig& cfg, int sample_idx);

// Scores a sample's design tables against the pooled truth.
void ScoreSample(SampleRecord& record, const PerformanceTable& true_table,
                 const RunConfig& cfg);

StudyRecord RunStudy(const RunConfig& cfg);

// Runs fn(i) for i in [0, n) on `workers` threads. Rethrows the exception of
// the lowest failing index.
void ParallelFor(int n, int workers, const std::function<void(int)>& fn);

}  // namespace emcs
