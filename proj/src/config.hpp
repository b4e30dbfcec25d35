#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "designs.hpp"
#include "estimators.hpp"
#include "sample.hpp"

namespace emcs {

// Column layout of an ingested CSV.
struct DatasetSchema {
  std::string outcome;
  std::string treatment;
  std::vector<VariableSpec> covariates;
  // Ordering for the sequential structured design; defaults to `covariates`.
  std::vector<std::string> sequential_order;

  void Validate() const;
  std::vector<VariableSpec> SequentialSchema() const;
};

struct DatasetSource {
  std::string path;
  DatasetSchema schema;
  // Arm sizes of each original sample drawn from the dataset; the full
  // dataset is used when absent.
  std::optional<Eigen::Index> subsample_treated;
  std::optional<Eigen::Index> subsample_control;
  double truth_att = 0.0;
};

struct RunConfig {
  std::optional<ScenarioSpec> scenario;
  std::optional<DatasetSource> dataset;

  int n_samples = 200;
  int n_reps = 200;
  // Original-style samples behind the pooled true performance table; the
  // first n_samples of them are also the EMCS originals. Defaults to
  // n_samples.
  std::optional<int> truth_samples;
  std::vector<DesignKind> designs{DesignKind::kPlacebo, DesignKind::kStructuredStylized};
  std::vector<EstimatorId> estimators{kAllEstimators.begin(), kAllEstimators.end()};

  PropensityKind ps_kind = PropensityKind::kLinearProbability;
  PlaceboConfig placebo;
  BandwidthGrid grid;
  std::optional<double> bandwidth;
  // Sequential structured schema; empty means derive from the source.
  std::vector<VariableSpec> sequential_schema;

  std::uint64_t master_seed = 1;
  int workers = 0;  // 0 = hardware concurrency
  std::string output_dir = "emcs_out";
  int calibration_samples = kDefaultCalibrationSamples;
  double failure_budget = 0.01;
  // Also write every replicate estimate (replicates_<design>.csv).
  bool write_replicates = false;

  int TruthSamples() const { return truth_samples.value_or(n_samples); }
  // Throws kValidation listing every violated rule.
  void Validate() const;
  void ApplyPaperScale();
};

inline constexpr int kDeskSamples = 200;
inline constexpr int kDeskReps = 200;
inline constexpr int kPaperScaleSamples = 1000;
inline constexpr int kPaperScaleReps = 1000;

// Parses and validates JSON config text. Parse errors carry line and column;
// validation errors list every violation with its field.
RunConfig ParseConfig(std::string_view json_text);
RunConfig LoadConfig(const std::string& path);

// Normalised JSON echo of a config (used by the run manifest).
std::string ConfigToJson(const RunConfig& cfg);

// Resolves the worker count: EMCS_BENCH_THREADS overrides the config, and 0
// means hardware concurrency.
int ResolveWorkers(int configured);

}  // namespace emcs
