#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <string>

#include "CLI11.hpp"
#include "emcs/emcs.h"

namespace {

int ExitCode(emcs_status s) {
  switch (s) {
    case EMCS_OK: return 0;
    case EMCS_ERR_PARSE:
    case EMCS_ERR_VALIDATION:
    case EMCS_ERR_INVALID_ARGUMENT: return 1;
    default: return 2;
  }
}

int Report(emcs_status s, const char* what) {
  std::fprintf(stderr, "emcs-bench: %s failed (%s): %s\n", what, emcs_status_name(s),
               emcs_last_error());
  return ExitCode(s);
}

void PrintSummary(const emcs_report* report) {
  std::printf("%-22s %-9s %9s %12s %10s %9s\n", "design", "metric", "sel_rate", "avg_regret",
              "%random", "tau");
  for (size_t i = 0; i < emcs_report_row_count(report); ++i) {
    emcs_validity_row r;
    if (emcs_report_row(report, i, &r) != EMCS_OK) continue;
    std::printf("%-22s %-9s %9.3f %12.4g %10.1f %9.3f\n", r.design, r.metric, r.selection_rate,
                r.avg_regret, r.avg_regret_pct_of_random, r.avg_kendall_tau);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EMCS estimator-selection benchmark"};
  app.set_version_flag("--version", std::string(emcs_version()));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  uint64_t seed = 0;
  int workers = -1;
  bool paper_scale = false;
  auto* run = app.add_subcommand("run", "run a study and write its report files");
  run->add_option("--config", config_path, "JSON run config")->required();
  auto* seed_opt = run->add_option("--seed", seed, "master seed override");
  run->add_option("--workers", workers, "worker threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber);
  run->add_option("--out", out_dir, "output directory override");
  run->add_flag("--paper-scale", paper_scale, "1000 samples x 1000 replications");

  int scenario = 2;
  double c = std::numeric_limits<double>::quiet_NaN();
  auto* theory = app.add_subcommand("theory", "closed-form variances for a scenario as JSON");
  theory->add_option("--scenario", scenario, "scenario id")->required()->check(CLI::Range(1, 3));
  theory->add_option("--c", c, "variance ratio Var(Y1|X)/Var(Y0|X)")
      ->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate-config", "parse and validate a config");
  validate->add_option("--config", config_path, "JSON run config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (*theory) {
    char* json = nullptr;
    const emcs_status s = emcs_theory_json(scenario, c, &json);
    if (s != EMCS_OK) return Report(s, "theory");
    std::printf("%s\n", json);
    emcs_string_free(json);
    return 0;
  }

  emcs_config* cfg = nullptr;
  emcs_status s = emcs_config_load(config_path.c_str(), &cfg);
  if (s != EMCS_OK) return Report(s, "config");

  if (*validate) {
    char* json = nullptr;
    s = emcs_config_to_json(cfg, &json);
    emcs_config_free(cfg);
    if (s != EMCS_OK) return Report(s, "config");
    std::printf("%s\n", json);
    emcs_string_free(json);
    return 0;
  }

  if (*seed_opt) emcs_config_set_seed(cfg, seed);
  if (workers >= 0) emcs_config_set_workers(cfg, workers);
  if (!out_dir.empty()) emcs_config_set_output_dir(cfg, out_dir.c_str());
  if (paper_scale) emcs_config_apply_paper_scale(cfg);

  const char* dir = nullptr;
  emcs_config_output_dir(cfg, &dir);
  const std::string target = dir;

  emcs_report* report = nullptr;
  s = emcs_run(cfg, &report);
  emcs_config_free(cfg);
  if (s != EMCS_OK) return Report(s, "run");
  s = emcs_report_write(report, target.c_str());
  if (s != EMCS_OK) {
    emcs_report_free(report);
    return Report(s, "write");
  }
  PrintSummary(report);
  std::printf("wrote %s\n", target.c_str());
  emcs_report_free(report);
  return 0;
}
