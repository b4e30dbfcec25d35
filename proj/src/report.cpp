#include "report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "error.hpp"

namespace emcs {

using nlohmann::json;
using nlohmann::ordered_json;

const char* LibraryVersion() { return "0.1.0"; }

std::string FormatNumber(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Guard against a non-C numeric locale.
  for (char* c = buf; *c; ++c) {
    if (*c == ',') *c = '.';
  }
  return buf;
}

namespace {

ordered_json Optional(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json Finite(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json TruthJson(const TruthValue& t) {
  return {{"att", Finite(t.att)}, {"provenance", ProvenanceName(t.provenance)}};
}

ordered_json EstimatorList(const RunConfig& cfg) {
  ordered_json a = ordered_json::array();
  for (auto e : cfg.estimators) a.push_back(EstimatorName(e));
  return a;
}

ordered_json TableJson(const PerformanceTable& t) {
  ordered_json rows = ordered_json::array();
  for (std::size_t j = 0; j < t.size(); ++j) {
    rows.push_back({{"estimator", EstimatorName(t.estimators[j])},
                    {"abs_bias", t.abs_bias[j]},
                    {"variance", t.variance[j]},
                    {"mse", t.mse[j]}});
  }
  return {{"truth", TruthJson(t.truth)}, {"n_reps", t.n_reps}, {"rows", rows}};
}

void WriteFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) Fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string ValidityReportJson(const StudyRecord& study) {
  const RunConfig& cfg = study.config;
  ordered_json rows = ordered_json::array();
  for (const auto& r : study.report.rows) {
    rows.push_back({{"design", DesignName(r.design)},
                    {"metric", MetricName(r.metric)},
                    {"selection_rate", r.selection_rate},
                    {"avg_regret", r.avg_regret},
                    {"avg_regret_pct_of_min", Optional(r.avg_regret_pct_of_min)},
                    {"avg_regret_pct_of_random", Optional(r.avg_regret_pct_of_random)},
                    {"avg_kendall_tau", r.avg_kendall_tau},
                    {"avg_correlation", Optional(r.avg_correlation)},
                    {"correlations_missing", r.correlations_missing},
                    {"n_samples", r.n_samples}});
  }
  ordered_json designs = ordered_json::array();
  for (auto d : cfg.designs) designs.push_back(DesignName(d));
  ordered_json j = {{"estimators", EstimatorList(cfg)},
                    {"designs", designs},
                    {"n_samples", cfg.n_samples},
                    {"n_reps", cfg.n_reps},
                    {"truth", TruthJson(study.truth)},
                    {"true_performance", TableJson(study.true_table)},
                    {"replications_attempted", study.replications_attempted},
                    {"replications_failed", study.replications_failed},
                    {"rows", rows}};
  return j.dump(2) + "\n";
}

std::string RunManifestJson(const StudyRecord& study) {
  const RunConfig& cfg = study.config;
  ordered_json paths = ordered_json::array();
  for (const auto& p : study.paths) {
    paths.push_back({{"purpose", PurposeName(p.purpose)},
                     {"purpose_tag", static_cast<std::uint32_t>(p.purpose)},
                     {"samples", {p.sample_begin, p.sample_end}},
                     {"reps", {p.rep_begin, p.rep_end}},
                     {"note", p.note}});
  }
  ordered_json j = {
      {"version", LibraryVersion()},
      {"seed", cfg.master_seed},
      {"config", ordered_json::parse(ConfigToJson(cfg))},
      {"truth", TruthJson(study.truth)},
      {"counts",
       {{"samples", cfg.n_samples},
        {"truth_samples", cfg.TruthSamples()},
        {"reps_per_design", cfg.n_reps},
        {"replications_attempted", study.replications_attempted},
        {"replications_failed", study.replications_failed},
        {"estimator_invocations", study.estimator_invocations}}},
      {"rng_paths", paths},
      // Everything below depends on the machine and schedule, not the inputs.
      {"runtime",
       {{"workers", study.workers},
        {"output_dir", cfg.output_dir},
        {"seconds_truth", study.seconds_truth},
        {"seconds_designs", study.seconds_designs},
        {"seconds_total", study.seconds_total}}}};
  return j.dump(2) + "\n";
}

void EmitReport(const StudyRecord& study, const std::string& output_dir) {
  const RunConfig& cfg = study.config;
  cfg.Validate();
  namespace fs = std::filesystem;
  const fs::path dir(output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create '" + output_dir + "': " + ec.message());

  WriteFile(dir / "validity_report.json", ValidityReportJson(study));

  {
    std::ostringstream os;
    os << "estimator,abs_bias,variance,mse\n";
    const auto& t = study.true_table;
    for (std::size_t j = 0; j < t.size(); ++j) {
      os << EstimatorName(t.estimators[j]) << ',' << FormatNumber(t.abs_bias[j]) << ','
         << FormatNumber(t.variance[j]) << ',' << FormatNumber(t.mse[j]) << '\n';
    }
    WriteFile(dir / "true_performance.csv", os.str());
  }

  for (std::size_t d = 0; d < cfg.designs.size(); ++d) {
    const DesignKind design = cfg.designs[d];
    if (design == DesignKind::kRandom) continue;
    std::ostringstream os;
    os << "sample_idx,estimator,abs_bias,variance,mse\n";
    for (const auto& rec : study.samples) {
      const auto& t = *rec.designs[d].table;
      for (std::size_t j = 0; j < t.size(); ++j) {
        os << rec.sample_idx << ',' << EstimatorName(t.estimators[j]) << ','
           << FormatNumber(t.abs_bias[j]) << ',' << FormatNumber(t.variance[j]) << ','
           << FormatNumber(t.mse[j]) << '\n';
      }
    }
    WriteFile(dir / (std::string("performance_") + DesignName(design) + ".csv"), os.str());

    if (cfg.write_replicates) {
      std::ostringstream rp;
      rp << "sample_idx,rep_idx,truth";
      for (auto e : cfg.estimators) rp << ',' << EstimatorName(e);
      rp << '\n';
      for (const auto& rec : study.samples) {
        const auto& s = rec.designs[d];
        for (Eigen::Index r = 0; r < s.estimates.rows(); ++r) {
          rp << rec.sample_idx << ',' << s.rep_idx[static_cast<std::size_t>(r)] << ','
             << FormatNumber(s.truths[static_cast<std::size_t>(r)]);
          for (Eigen::Index j = 0; j < s.estimates.cols(); ++j) {
            rp << ',' << FormatNumber(s.estimates(r, j));
          }
          rp << '\n';
        }
      }
      WriteFile(dir / (std::string("replicates_") + DesignName(design) + ".csv"), rp.str());
    }
  }

  {
    std::ostringstream os;
    os << "sample_idx,design,metric,selected_estimator,true_best,regret\n";
    for (const auto& rec : study.samples) {
      for (const auto& slice : rec.designs) {
        for (std::size_t m = 0; m < kAllMetrics.size(); ++m) {
          const auto& s = slice.selections[m];
          os << rec.sample_idx << ',' << DesignName(slice.design) << ','
             << MetricName(kAllMetrics[m]) << ','
             << EstimatorName(cfg.estimators[static_cast<std::size_t>(s.selected)]) << ','
             << EstimatorName(cfg.estimators[static_cast<std::size_t>(s.true_best)]) << ','
             << FormatNumber(s.regret) << '\n';
        }
      }
    }
    WriteFile(dir / "selections.csv", os.str());
  }

  {
    std::ostringstream os;
    os << "sample_idx,emcs_original,estimator,estimate\n";
    for (Eigen::Index i = 0; i < study.truth_estimates.rows(); ++i) {
      for (std::size_t j = 0; j < cfg.estimators.size(); ++j) {
        os << i << ',' << (i < cfg.n_samples ? 1 : 0) << ','
           << EstimatorName(cfg.estimators[j]) << ','
           << FormatNumber(study.truth_estimates(i, static_cast<Eigen::Index>(j))) << '\n';
      }
    }
    WriteFile(dir / "point_estimates.csv", os.str());
  }

  {
    std::ostringstream os;
    os << "sample_idx,design,rep_idx,kind,message\n";
    for (const auto& rec : study.samples) {
      for (const auto& slice : rec.designs) {
        for (const auto& f : slice.failures) {
          os << rec.sample_idx << ',' << DesignName(slice.design) << ',' << f.rep_idx << ','
             << f.kind << ',' << CsvField(f.message) << '\n';
        }
      }
    }
    WriteFile(dir / "failures.csv", os.str());
  }

  WriteFile(dir / "run_manifest.json", RunManifestJson(study));
}

}  // namespace emcs
