#include "study.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <sstream>
#include <thread>

#include "dataset.hpp"
#include "error.hpp"

namespace emcs {

void ParallelFor(int n, int workers, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int t = std::clamp(workers, 1, n);
  if (t == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(t));
    for (int k = 0; k < t; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

Purpose PurposeOf(DesignKind d) {
  switch (d) {
    case DesignKind::kPlacebo: return Purpose::kPlacebo;
    case DesignKind::kStructuredStylized: return Purpose::kStructuredStylized;
    case DesignKind::kStructuredSequential: return Purpose::kStructuredSequential;
    case DesignKind::kBootstrap: return Purpose::kBootstrap;
    case DesignKind::kRandom: return Purpose::kRandomRanking;
  }
  return Purpose::kTest;
}

EstimatorSettings SettingsFor(const RunConfig& cfg, std::optional<double> bandwidth) {
  EstimatorSettings s;
  s.ps_kind = cfg.ps_kind;
  s.grid = cfg.grid;
  s.bandwidth = bandwidth;
  return s;
}

bool NeedsBandwidth(const RunConfig& cfg) {
  return std::find(cfg.estimators.begin(), cfg.estimators.end(), EstimatorId::kKernelMatch) !=
         cfg.estimators.end();
}

// Point estimates with kernel bandwidth chosen once on this sample.
Eigen::VectorXd PointEstimates(const Sample& sample, const RunConfig& cfg,
                               std::optional<double>& bandwidth) {
  bandwidth = cfg.bandwidth;
  if (!bandwidth && NeedsBandwidth(cfg)) {
    bandwidth = SelectBandwidthLoocv(sample, cfg.ps_kind, cfg.grid);
  }
  const auto est = EstimateAll(sample, cfg.estimators, SettingsFor(cfg, bandwidth));
  Eigen::VectorXd v(static_cast<Eigen::Index>(est.size()));
  for (std::size_t j = 0; j < est.size(); ++j) {
    if (!std::isfinite(est[j].value)) {
      Fail(ErrorKind::kDegenerateSample,
           std::string("non-finite ") + EstimatorName(est[j].estimator) + " estimate");
    }
    v[static_cast<Eigen::Index>(j)] = est[j].value;
  }
  return v;
}

std::vector<VariableSpec> SequentialSchemaFor(const RunConfig& cfg, const Sample& sample) {
  if (!cfg.sequential_schema.empty()) return cfg.sequential_schema;
  if (cfg.dataset) return cfg.dataset->schema.SequentialSchema();
  std::vector<VariableSpec> out;
  for (const auto& name : sample.covariate_names()) {
    out.push_back({name, VariableKind::kContinuous});
  }
  return out;
}

std::string Context(int sample_idx, DesignKind d, int rep) {
  std::ostringstream os;
  os << "sample " << sample_idx << ", design " << DesignName(d);
  if (rep >= 0) os << ", rep " << rep;
  return os.str();
}

DesignSlice RunDesign(const Sample& original, const RunConfig& cfg, int sample_idx,
                      DesignKind design, const Eigen::VectorXd& point,
                      std::optional<double> bandwidth, std::int64_t& invocations) {
  DesignSlice slice;
  slice.design = design;
  const int j_count = static_cast<int>(cfg.estimators.size());
  const Purpose purpose = PurposeOf(design);
  const auto seed = cfg.master_seed;
  const auto s_idx = static_cast<std::uint64_t>(sample_idx);

  if (design == DesignKind::kRandom) {
    RngStream rng(seed, purpose, s_idx, 0);
    slice.random_ranking = RandomRanking(j_count, rng);
    return slice;
  }

  // Per-sample set-up shared by every replicate.
  std::optional<PlaceboSetup> placebo;
  std::optional<StructuredStylizedModel> stylized;
  std::optional<SequentialStructuredModel> sequential;
  try {
    switch (design) {
      case DesignKind::kPlacebo: placebo = PreparePlacebo(original, cfg.placebo); break;
      case DesignKind::kStructuredStylized: stylized = FitStructuredStylized(original); break;
      case DesignKind::kStructuredSequential:
        sequential = FitStructuredSequential(original, SequentialSchemaFor(cfg, original));
        break;
      default: break;
    }
  } catch (const Error& e) {
    Fail(e.kind(), Context(sample_idx, design, -1) + ": " + e.what());
  }

  const EstimatorSettings settings = SettingsFor(cfg, bandwidth);
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(static_cast<std::size_t>(cfg.n_reps));
  for (int r = 0; r < cfg.n_reps; ++r) {
    RngStream rng(seed, purpose, s_idx, static_cast<std::uint64_t>(r));
    try {
      DesignReplicate rep{original, {0.0, TruthProvenance::kZeroByConstruction}};
      switch (design) {
        case DesignKind::kPlacebo: rep = PlaceboReplicate(*placebo, rng); break;
        case DesignKind::kStructuredStylized:
          rep = StructuredReplicateStylized(*stylized, rng);
          break;
        case DesignKind::kStructuredSequential:
          rep = StructuredReplicateSequential(*sequential, rng);
          break;
        case DesignKind::kBootstrap:
          rep.sample = BootstrapReplicate(original, rng);
          rep.truth = {std::nan(""), TruthProvenance::kCentredOnPointEstimates};
          break;
        default: break;
      }
      const auto est = EstimateAll(rep.sample, cfg.estimators, settings);
      Eigen::VectorXd row(j_count);
      for (int j = 0; j < j_count; ++j) {
        const auto& e = est[static_cast<std::size_t>(j)];
        if (!std::isfinite(e.value)) {
          Fail(ErrorKind::kDegenerateSample,
               std::string("non-finite ") + EstimatorName(e.estimator) + " estimate");
        }
        row[j] = e.value;
      }
      rows.push_back(row);
      slice.rep_idx.push_back(r);
      slice.truths.push_back(rep.truth.att);
      if (slice.rep_idx.size() == 1) slice.table.emplace().truth = rep.truth;
    } catch (const Error& e) {
      slice.failures.push_back({r, ErrorKindName(e.kind()),
                                Context(sample_idx, design, r) + ": " + e.what()});
    }
  }

  const auto n_eff = static_cast<Eigen::Index>(rows.size());
  invocations += static_cast<std::int64_t>(n_eff) * j_count;
  slice.estimates.resize(n_eff, j_count);
  for (Eigen::Index i = 0; i < n_eff; ++i) {
    slice.estimates.row(i) = rows[static_cast<std::size_t>(i)].transpose();
  }
  if (n_eff < 2) {
    slice.table.reset();
    return slice;  // counted as failures; budget check decides
  }

  if (design == DesignKind::kBootstrap) {
    slice.table = BootstrapPerformance(slice.estimates, point, cfg.estimators);
    return slice;
  }
  const TruthProvenance prov = slice.table->truth.provenance;
  const bool constant_truth =
      std::all_of(slice.truths.begin(), slice.truths.end(),
                  [&](double t) { return t == slice.truths.front(); });
  if (constant_truth) {
    slice.table = PerformanceFromEstimates(slice.estimates, {slice.truths.front(), prov},
                                           cfg.estimators);
  } else {
    // Replicate-specific truth: moments of the errors.
    Eigen::MatrixXd errors = slice.estimates;
    for (Eigen::Index i = 0; i < n_eff; ++i) {
      errors.row(i).array() -= slice.truths[static_cast<std::size_t>(i)];
    }
    PerformanceTable t = PerformanceFromEstimates(errors, {0.0, prov}, cfg.estimators);
    double mean_truth = 0.0;
    for (double v : slice.truths) mean_truth += v;
    mean_truth /= static_cast<double>(n_eff);
    t.truth = {mean_truth, prov};
    t.centre.assign(t.size(), mean_truth);
    slice.table = t;
  }
  return slice;
}

SampleRecord DesignsForSample(const Sample& original, const RunConfig& cfg, int sample_idx,
                              const Eigen::VectorXd& point, std::optional<double> bandwidth) {
  SampleRecord rec;
  rec.sample_idx = sample_idx;
  rec.point_estimates = point;
  rec.bandwidth = bandwidth;
  rec.estimator_invocations = static_cast<std::int64_t>(cfg.estimators.size());
  for (DesignKind d : cfg.designs) {
    rec.designs.push_back(RunDesign(original, cfg, sample_idx, d, rec.point_estimates,
                                    rec.bandwidth, rec.estimator_invocations));
  }
  return rec;
}

double Seconds(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

}  // namespace

Sample OriginalSample(const RunConfig& cfg, int sample_idx, const Sample* population) {
  const auto idx = static_cast<std::uint64_t>(sample_idx);
  if (cfg.scenario) {
    RngStream rng(cfg.master_seed, Purpose::kOriginalSample, idx);
    return GenerateScenarioSample(*cfg.scenario, rng);
  }
  if (population == nullptr) Fail(ErrorKind::kInvalidArgument, "dataset population missing");
  const DatasetSource& ds = *cfg.dataset;
  if (!ds.subsample_treated) return *population;
  RngStream rng(cfg.master_seed, Purpose::kSubsample, idx);
  return Subsample(*population, *ds.subsample_treated, *ds.subsample_control, rng);
}

SampleRecord RunSingleSample(const Sample& original, const RunConfig& cfg, int sample_idx) {
  std::optional<double> bandwidth;
  Eigen::VectorXd point;
  try {
    point = PointEstimates(original, cfg, bandwidth);
  } catch (const Error& e) {
    Fail(e.kind(), "sample " + std::to_string(sample_idx) + ", original estimates: " + e.what());
  }
  return DesignsForSample(original, cfg, sample_idx, point, bandwidth);
}

void ScoreSample(SampleRecord& record, const PerformanceTable& true_table,
                 const RunConfig& cfg) {
  (void)cfg;
  for (auto& slice : record.designs) {
    for (std::size_t m = 0; m < kAllMetrics.size(); ++m) {
      if (slice.design == DesignKind::kRandom) {
        slice.selections[m] =
            ScoreRandomSelection(true_table, slice.random_ranking, kAllMetrics[m]);
      } else if (slice.table) {
        slice.selections[m] = ScoreSelection(true_table, *slice.table, kAllMetrics[m]);
      }
    }
  }
}

StudyRecord RunStudy(const RunConfig& cfg) {
  cfg.Validate();
  const auto t0 = std::chrono::steady_clock::now();
  StudyRecord study;
  study.config = cfg;
  study.workers = ResolveWorkers(cfg.workers);
  const int n_samples = cfg.n_samples;
  const int n_truth = cfg.TruthSamples();
  const int j_count = static_cast<int>(cfg.estimators.size());

  std::optional<Sample> population;
  if (cfg.dataset) {
    population = LoadDatasetCsv(cfg.dataset->path, cfg.dataset->schema);
    study.truth = {cfg.dataset->truth_att, TruthProvenance::kUserSupplied};
  } else {
    RngStream rng(cfg.master_seed, Purpose::kTruthCalibration, 0);
    study.truth = ScenarioTrueAtt(*cfg.scenario, cfg.calibration_samples, rng);
  }

  // Steps 1-3: originals, their point estimates, and the pooled truth table.
  std::vector<std::optional<Sample>> originals(static_cast<std::size_t>(n_samples));
  std::vector<std::optional<double>> bandwidths(static_cast<std::size_t>(n_truth));
  study.truth_estimates.resize(n_truth, j_count);
  ParallelFor(n_truth, study.workers, [&](int i) {
    Sample s = OriginalSample(cfg, i, population ? &*population : nullptr);
    Eigen::VectorXd v;
    try {
      v = PointEstimates(s, cfg, bandwidths[static_cast<std::size_t>(i)]);
    } catch (const Error& e) {
      Fail(e.kind(), "sample " + std::to_string(i) + ", original estimates: " + e.what());
    }
    study.truth_estimates.row(i) = v.transpose();
    if (i < n_samples) originals[static_cast<std::size_t>(i)] = std::move(s);
  });
  study.true_table = PerformanceFromEstimates(study.truth_estimates, study.truth, cfg.estimators);
  const auto t1 = std::chrono::steady_clock::now();

  // Step 4: designs per sample.
  study.samples.resize(static_cast<std::size_t>(n_samples));
  ParallelFor(n_samples, study.workers, [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    study.samples[k] = DesignsForSample(*originals[k], cfg, i,
                                        study.truth_estimates.row(i).transpose(), bandwidths[k]);
    originals[k].reset();
  });
  const auto t2 = std::chrono::steady_clock::now();

  // Failure accounting, in sample order.
  std::string first_failure;
  for (const auto& rec : study.samples) {
    study.estimator_invocations += rec.estimator_invocations;
    for (const auto& slice : rec.designs) {
      if (slice.design == DesignKind::kRandom) continue;
      study.replications_attempted += cfg.n_reps;
      study.replications_failed += static_cast<std::int64_t>(slice.failures.size());
      if (first_failure.empty() && !slice.failures.empty()) {
        first_failure = slice.failures.front().message;
      }
    }
  }
  study.estimator_invocations += static_cast<std::int64_t>(n_truth - n_samples) * j_count;
  const double fail_rate =
      study.replications_attempted == 0
          ? 0.0
          : static_cast<double>(study.replications_failed) /
                static_cast<double>(study.replications_attempted);
  bool starved = false;
  for (const auto& rec : study.samples) {
    for (const auto& slice : rec.designs) {
      starved = starved || (slice.design != DesignKind::kRandom && !slice.table);
    }
  }
  if (fail_rate > cfg.failure_budget || starved) {
    std::ostringstream os;
    os << study.replications_failed << " of " << study.replications_attempted
       << " replications failed (budget " << cfg.failure_budget << "); first: " << first_failure;
    Fail(ErrorKind::kFailureBudget, os.str());
  }

  // Step 5: score and aggregate.
  for (auto& rec : study.samples) ScoreSample(rec, study.true_table, cfg);
  for (std::size_t d = 0; d < cfg.designs.size(); ++d) {
    const DesignKind design = cfg.designs[d];
    for (std::size_t m = 0; m < kAllMetrics.size(); ++m) {
      if (design == DesignKind::kRandom) {
        study.report.rows.push_back(AnalyticRandomRow(study.true_table, kAllMetrics[m], n_samples));
        continue;
      }
      std::vector<SelectionRecord> records;
      records.reserve(study.samples.size());
      for (const auto& rec : study.samples) records.push_back(rec.designs[d].selections[m]);
      study.report.rows.push_back(
          AggregateRecords(design, kAllMetrics[m], study.true_table, records));
    }
  }

  // Every RNG consumer and the path block it owns.
  if (cfg.scenario) {
    study.paths.push_back({Purpose::kOriginalSample, 0, n_truth, 0, 1, "scenario draw"});
    study.paths.push_back({Purpose::kTruthCalibration, 0, 1, 0, 1,
                           "child streams 0.." + std::to_string(cfg.calibration_samples - 1)});
  } else if (cfg.dataset->subsample_treated) {
    study.paths.push_back({Purpose::kSubsample, 0, n_truth, 0, 1, "dataset subsample"});
  }
  for (DesignKind d : cfg.designs) {
    const bool random = d == DesignKind::kRandom;
    study.paths.push_back({PurposeOf(d), 0, n_samples, 0, random ? 1 : cfg.n_reps,
                           random ? "one ranking per sample" : "one stream per replicate"});
  }

  const auto t3 = std::chrono::steady_clock::now();
  study.seconds_truth = Seconds(t0, t1);
  study.seconds_designs = Seconds(t1, t2);
  study.seconds_total = Seconds(t0, t3);
  return study;
}

}  // namespace emcs
