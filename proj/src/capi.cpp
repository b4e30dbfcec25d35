#include "emcs/emcs.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <memory>
#include <string>

#include "json.hpp"

#include "config.hpp"
#include "error.hpp"
#include "report.hpp"
#include "study.hpp"
#include "theory.hpp"

struct emcs_config {
  emcs::RunConfig cfg;
};

struct emcs_report {
  emcs::StudyRecord study;
  std::vector<std::string> names;  // backing storage for row strings
};

namespace {

thread_local std::string g_last_error;

emcs_status StatusOf(emcs::ErrorKind kind) {
  using emcs::ErrorKind;
  switch (kind) {
    case ErrorKind::kInvalidArgument: return EMCS_ERR_INVALID_ARGUMENT;
    case ErrorKind::kRankDeficient: return EMCS_ERR_RANK_DEFICIENT;
    case ErrorKind::kDegenerateSample: return EMCS_ERR_DEGENERATE_SAMPLE;
    case ErrorKind::kInsufficientUnits: return EMCS_ERR_INSUFFICIENT_UNITS;
    case ErrorKind::kNoStrictPreference: return EMCS_ERR_NO_STRICT_PREFERENCE;
    case ErrorKind::kUndefined: return EMCS_ERR_UNDEFINED;
    case ErrorKind::kParse: return EMCS_ERR_PARSE;
    case ErrorKind::kValidation: return EMCS_ERR_VALIDATION;
    case ErrorKind::kIo: return EMCS_ERR_IO;
    case ErrorKind::kFailureBudget: return EMCS_ERR_FAILURE_BUDGET;
  }
  return EMCS_ERR_INTERNAL;
}

template <typename F>
emcs_status Guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return EMCS_OK;
  } catch (const emcs::Error& e) {
    g_last_error = e.what();
    return StatusOf(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return EMCS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EMCS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return EMCS_ERR_INTERNAL;
  }
}

emcs_status NullArg(const char* what) {
  g_last_error = std::string(what) + " is null";
  return EMCS_ERR_INVALID_ARGUMENT;
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

double OrNan(const std::optional<double>& v) {
  return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

std::string TheoryJson(int scenario, double c) {
  if (scenario < 1 || scenario > 3) {
    emcs::Fail(emcs::ErrorKind::kInvalidArgument, "scenario must be 1, 2 or 3");
  }
  const auto spec = emcs::ScenarioSpec::ById(static_cast<emcs::ScenarioId>(scenario));
  std::optional<double> c_opt;
  if (!std::isnan(c)) {
    if (!(c > 0.0) || !std::isfinite(c)) {
      emcs::Fail(emcs::ErrorKind::kInvalidArgument, "c must be finite and > 0");
    }
    c_opt = c;
  }
  const emcs::ScenarioTheory t = emcs::EvaluateScenarioTheory(spec, c_opt);
  using nlohmann::ordered_json;
  const double gap = t.sigma2_sq - t.sigma1_sq;
  const double sign_expr = (t.c - 1.0) * t.deltas.delta2 - t.deltas.delta1;
  ordered_json j = {
      {"scenario", scenario},
      {"c", t.c},
      {"sigma_eps_sq", t.sigma_eps_sq},
      {"moments",
       {{"p_treat", t.moments.p_treat},
        {"m_inv", t.moments.m_inv},
        {"m_sq", t.moments.m_sq},
        {"m_lin", t.moments.m_lin},
        {"m_prod", t.moments.m_prod}}},
      {"sigma1_sq", t.sigma1_sq},
      {"sigma2_sq", t.sigma2_sq},
      {"delta1", t.deltas.delta1},
      {"delta2", t.deltas.delta2},
      {"c_threshold", t.c_threshold ? ordered_json(*t.c_threshold) : ordered_json(nullptr)},
      {"sigma2_minus_sigma1", gap},
      {"ipw_more_efficient", gap > 0.0},
      {"placebo_variances", {{"sigma1_tilde_sq", t.placebo.ipw}, {"sigma2_tilde_sq", t.placebo.ols}}},
      {"sign_check", (gap > 0.0) == (sign_expr > 0.0)}};
  return j.dump(2);
}

}  // namespace

extern "C" {

const char* emcs_version(void) { return emcs::LibraryVersion(); }

const char* emcs_last_error(void) { return g_last_error.c_str(); }

const char* emcs_status_name(emcs_status status) {
  switch (status) {
    case EMCS_OK: return "ok";
    case EMCS_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case EMCS_ERR_PARSE: return "parse_error";
    case EMCS_ERR_VALIDATION: return "validation_error";
    case EMCS_ERR_IO: return "io_error";
    case EMCS_ERR_FAILURE_BUDGET: return "failure_budget_exceeded";
    case EMCS_ERR_RANK_DEFICIENT: return "rank_deficient";
    case EMCS_ERR_DEGENERATE_SAMPLE: return "degenerate_sample";
    case EMCS_ERR_INSUFFICIENT_UNITS: return "insufficient_units";
    case EMCS_ERR_NO_STRICT_PREFERENCE: return "no_strict_preference";
    case EMCS_ERR_UNDEFINED: return "undefined";
    case EMCS_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

emcs_status emcs_config_parse(const char* json_text, emcs_config** out) {
  if (json_text == nullptr) return NullArg("json_text");
  if (out == nullptr) return NullArg("out");
  *out = nullptr;
  return Guard([&] { *out = new emcs_config{emcs::ParseConfig(json_text)}; });
}

emcs_status emcs_config_load(const char* path, emcs_config** out) {
  if (path == nullptr) return NullArg("path");
  if (out == nullptr) return NullArg("out");
  *out = nullptr;
  return Guard([&] { *out = new emcs_config{emcs::LoadConfig(path)}; });
}

emcs_status emcs_config_set_seed(emcs_config* cfg, uint64_t seed) {
  if (cfg == nullptr) return NullArg("cfg");
  cfg->cfg.master_seed = seed;
  g_last_error.clear();
  return EMCS_OK;
}

emcs_status emcs_config_set_workers(emcs_config* cfg, int workers) {
  if (cfg == nullptr) return NullArg("cfg");
  if (workers < 0) {
    g_last_error = "workers must be >= 0";
    return EMCS_ERR_VALIDATION;
  }
  cfg->cfg.workers = workers;
  g_last_error.clear();
  return EMCS_OK;
}

emcs_status emcs_config_set_output_dir(emcs_config* cfg, const char* dir) {
  if (cfg == nullptr) return NullArg("cfg");
  if (dir == nullptr || *dir == '\0') {
    g_last_error = "output_dir must be non-empty";
    return EMCS_ERR_VALIDATION;
  }
  return Guard([&] { cfg->cfg.output_dir = dir; });
}

emcs_status emcs_config_apply_paper_scale(emcs_config* cfg) {
  if (cfg == nullptr) return NullArg("cfg");
  return Guard([&] { cfg->cfg.ApplyPaperScale(); });
}

emcs_status emcs_config_output_dir(const emcs_config* cfg, const char** out) {
  if (cfg == nullptr) return NullArg("cfg");
  if (out == nullptr) return NullArg("out");
  *out = cfg->cfg.output_dir.c_str();
  g_last_error.clear();
  return EMCS_OK;
}

emcs_status emcs_config_to_json(const emcs_config* cfg, char** out) {
  if (cfg == nullptr) return NullArg("cfg");
  if (out == nullptr) return NullArg("out");
  *out = nullptr;
  return Guard([&] { *out = CopyString(emcs::ConfigToJson(cfg->cfg)); });
}

void emcs_config_free(emcs_config* cfg) { delete cfg; }

emcs_status emcs_run(const emcs_config* cfg, emcs_report** out) {
  if (cfg == nullptr) return NullArg("cfg");
  if (out == nullptr) return NullArg("out");
  *out = nullptr;
  return Guard([&] {
    auto report = std::make_unique<emcs_report>();
    report->study = emcs::RunStudy(cfg->cfg);
    for (const auto& r : report->study.report.rows) {
      report->names.push_back(emcs::DesignName(r.design));
      report->names.push_back(emcs::MetricName(r.metric));
    }
    *out = report.release();
  });
}

emcs_status emcs_report_write(const emcs_report* report, const char* output_dir) {
  if (report == nullptr) return NullArg("report");
  if (output_dir == nullptr) return NullArg("output_dir");
  return Guard([&] { emcs::EmitReport(report->study, output_dir); });
}

emcs_status emcs_report_to_json(const emcs_report* report, char** out) {
  if (report == nullptr) return NullArg("report");
  if (out == nullptr) return NullArg("out");
  *out = nullptr;
  return Guard([&] { *out = CopyString(emcs::ValidityReportJson(report->study)); });
}

size_t emcs_report_row_count(const emcs_report* report) {
  return report == nullptr ? 0 : report->study.report.rows.size();
}

emcs_status emcs_report_row(const emcs_report* report, size_t index, emcs_validity_row* out) {
  if (report == nullptr) return NullArg("report");
  if (out == nullptr) return NullArg("out");
  const auto& rows = report->study.report.rows;
  if (index >= rows.size()) {
    g_last_error = "row index out of range";
    return EMCS_ERR_INVALID_ARGUMENT;
  }
  const auto& r = rows[index];
  out->design = report->names[2 * index].c_str();
  out->metric = report->names[2 * index + 1].c_str();
  out->selection_rate = r.selection_rate;
  out->avg_regret = r.avg_regret;
  out->avg_regret_pct_of_min = OrNan(r.avg_regret_pct_of_min);
  out->avg_regret_pct_of_random = OrNan(r.avg_regret_pct_of_random);
  out->avg_kendall_tau = r.avg_kendall_tau;
  out->avg_correlation = OrNan(r.avg_correlation);
  out->correlations_missing = r.correlations_missing;
  out->n_samples = r.n_samples;
  g_last_error.clear();
  return EMCS_OK;
}

void emcs_report_free(emcs_report* report) { delete report; }

emcs_status emcs_theory_json(int scenario, double c, char** out) {
  if (out == nullptr) return NullArg("out");
  *out = nullptr;
  return Guard([&] { *out = CopyString(TheoryJson(scenario, c)); });
}

void emcs_string_free(char* s) { std::free(s); }

}  // extern "C"
