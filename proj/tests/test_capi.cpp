#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "emcs/emcs.h"

namespace fs = std::filesystem;

namespace {

const char* kSmallRun = R"({
  "source": {"scenario": 1},
  "n_samples": 4, "n_reps": 5,
  "designs": ["placebo", "random"],
  "estimators": ["OLS", "IPW"],
  "workers": 1
})";

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(emcs_version()).size() > 0);
  CHECK(std::string(emcs_status_name(EMCS_OK)) == "ok");
  CHECK(std::string(emcs_status_name(EMCS_ERR_FAILURE_BUDGET)) == "failure_budget_exceeded");
}

TEST_CASE("null arguments are rejected, not dereferenced") {
  emcs_config* cfg = nullptr;
  CHECK(emcs_config_parse(nullptr, &cfg) == EMCS_ERR_INVALID_ARGUMENT);
  CHECK(std::string(emcs_last_error()).find("null") != std::string::npos);
  CHECK(emcs_config_parse("{}", nullptr) == EMCS_ERR_INVALID_ARGUMENT);
  CHECK(emcs_run(nullptr, nullptr) == EMCS_ERR_INVALID_ARGUMENT);
  CHECK(emcs_report_row_count(nullptr) == 0);
  emcs_config_free(nullptr);
  emcs_report_free(nullptr);
  emcs_string_free(nullptr);
}

TEST_CASE("config errors map to status codes with a message") {
  emcs_config* cfg = reinterpret_cast<emcs_config*>(0x1);
  CHECK(emcs_config_parse("{\"source\": ", &cfg) == EMCS_ERR_PARSE);
  CHECK(cfg == nullptr);
  CHECK(std::string(emcs_last_error()).find("line") != std::string::npos);
  CHECK(emcs_config_parse(R"({"source": {"scenario": 2}, "n_reps": 1})", &cfg) ==
        EMCS_ERR_VALIDATION);
  CHECK(std::string(emcs_last_error()).find("n_reps") != std::string::npos);
  CHECK(emcs_config_load("/nonexistent/cfg.json", &cfg) == EMCS_ERR_IO);
}

TEST_CASE("config handle round trip") {
  emcs_config* cfg = nullptr;
  REQUIRE(emcs_config_parse(R"({"source": {"scenario": 2}})", &cfg) == EMCS_OK);
  CHECK(std::string(emcs_last_error()).empty());
  CHECK(emcs_config_set_seed(cfg, 42) == EMCS_OK);
  CHECK(emcs_config_set_workers(cfg, -1) == EMCS_ERR_VALIDATION);
  CHECK(emcs_config_set_output_dir(cfg, "") == EMCS_ERR_VALIDATION);
  CHECK(emcs_config_set_output_dir(cfg, "somewhere") == EMCS_OK);
  CHECK(emcs_config_apply_paper_scale(cfg) == EMCS_OK);
  const char* dir = nullptr;
  CHECK(emcs_config_output_dir(cfg, &dir) == EMCS_OK);
  CHECK(std::string(dir) == "somewhere");
  char* json = nullptr;
  REQUIRE(emcs_config_to_json(cfg, &json) == EMCS_OK);
  const auto j = nlohmann::json::parse(json);
  emcs_string_free(json);
  CHECK(j["seed"] == 42);
  CHECK(j["n_samples"] == 1000);
  CHECK(j["n_reps"] == 1000);
  CHECK(j["placebo"]["lambda"] == 1.0);
  emcs_config_free(cfg);
}

TEST_CASE("theory json") {
  char* json = nullptr;
  REQUIRE(emcs_theory_json(2, 9.0, &json) == EMCS_OK);
  const auto j = nlohmann::json::parse(json);
  emcs_string_free(json);
  CHECK(j["c"] == 9.0);
  const double s1 = j["sigma1_sq"], s2 = j["sigma2_sq"];
  CHECK(s2 > s1);
  CHECK(j["sign_check"] == true);
  CHECK(j["c_threshold"].is_number());
  CHECK(j["placebo_variances"]["sigma1_tilde_sq"].get<double>() >=
        j["placebo_variances"]["sigma2_tilde_sq"].get<double>());

  REQUIRE(emcs_theory_json(1, std::nan(""), &json) == EMCS_OK);
  const auto j1 = nlohmann::json::parse(json);
  emcs_string_free(json);
  CHECK(j1["c"] == 1.0);
  CHECK(j1["ipw_more_efficient"] == false);

  CHECK(emcs_theory_json(4, 1.0, &json) == EMCS_ERR_INVALID_ARGUMENT);
  CHECK(emcs_theory_json(2, -1.0, &json) == EMCS_ERR_INVALID_ARGUMENT);
}

TEST_CASE("run, inspect rows, write files") {
  emcs_config* cfg = nullptr;
  REQUIRE(emcs_config_parse(kSmallRun, &cfg) == EMCS_OK);
  emcs_report* report = nullptr;
  REQUIRE(emcs_run(cfg, &report) == EMCS_OK);
  emcs_config_free(cfg);

  REQUIRE(emcs_report_row_count(report) == 6);
  emcs_validity_row row;
  REQUIRE(emcs_report_row(report, 0, &row) == EMCS_OK);
  CHECK(std::string(row.design) == "placebo");
  CHECK(std::string(row.metric) == "abs_bias");
  CHECK(row.n_samples == 4);
  CHECK(row.selection_rate >= 0.0);
  CHECK(row.selection_rate <= 1.0);
  REQUIRE(emcs_report_row(report, 5, &row) == EMCS_OK);
  CHECK(std::string(row.design) == "random");
  CHECK(row.selection_rate == doctest::Approx(0.5));
  CHECK(std::isnan(row.avg_correlation));
  CHECK(emcs_report_row(report, 6, &row) == EMCS_ERR_INVALID_ARGUMENT);

  char* json = nullptr;
  REQUIRE(emcs_report_to_json(report, &json) == EMCS_OK);
  CHECK(nlohmann::json::parse(json)["rows"].size() == 6);
  emcs_string_free(json);

  const fs::path dir = fs::temp_directory_path() / "emcs_capi_out";
  fs::remove_all(dir);
  REQUIRE(emcs_report_write(report, dir.string().c_str()) == EMCS_OK);
  CHECK(fs::exists(dir / "validity_report.json"));
  CHECK(fs::exists(dir / "performance_placebo.csv"));
  CHECK_FALSE(fs::exists(dir / "performance_random.csv"));
  emcs_report_free(report);
  fs::remove_all(dir);
}
