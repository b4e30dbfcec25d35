#ifndef EMCS_EMCS_H
#define EMCS_EMCS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EMCS_API __declspec(dllexport)
#else
#define EMCS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum emcs_status {
  EMCS_OK = 0,
  EMCS_ERR_INVALID_ARGUMENT = 1,
  EMCS_ERR_PARSE = 2,
  EMCS_ERR_VALIDATION = 3,
  EMCS_ERR_IO = 4,
  EMCS_ERR_FAILURE_BUDGET = 5,
  EMCS_ERR_RANK_DEFICIENT = 6,
  EMCS_ERR_DEGENERATE_SAMPLE = 7,
  EMCS_ERR_INSUFFICIENT_UNITS = 8,
  EMCS_ERR_NO_STRICT_PREFERENCE = 9,
  EMCS_ERR_UNDEFINED = 10,
  EMCS_ERR_INTERNAL = 11
} emcs_status;

typedef struct emcs_config emcs_config;
typedef struct emcs_report emcs_report;

/* One row of the validity report. String members are owned by the report. */
typedef struct emcs_validity_row {
  const char* design;
  const char* metric;
  double selection_rate;
  double avg_regret;
  double avg_regret_pct_of_min;    /* NaN when undefined */
  double avg_regret_pct_of_random; /* NaN when undefined */
  double avg_kendall_tau;
  double avg_correlation;          /* NaN when every sample was missing */
  int correlations_missing;
  int n_samples;
} emcs_validity_row;

EMCS_API const char* emcs_version(void);
/* Message of the last failed call on this thread; "" if none. */
EMCS_API const char* emcs_last_error(void);
EMCS_API const char* emcs_status_name(emcs_status status);

EMCS_API emcs_status emcs_config_parse(const char* json_text, emcs_config** out);
EMCS_API emcs_status emcs_config_load(const char* path, emcs_config** out);
EMCS_API emcs_status emcs_config_set_seed(emcs_config* cfg, uint64_t seed);
EMCS_API emcs_status emcs_config_set_workers(emcs_config* cfg, int workers);
EMCS_API emcs_status emcs_config_set_output_dir(emcs_config* cfg, const char* dir);
EMCS_API emcs_status emcs_config_apply_paper_scale(emcs_config* cfg);
EMCS_API emcs_status emcs_config_output_dir(const emcs_config* cfg, const char** out);
/* Normalised config echo; free with emcs_string_free. */
EMCS_API emcs_status emcs_config_to_json(const emcs_config* cfg, char** out);
EMCS_API void emcs_config_free(emcs_config* cfg);

EMCS_API emcs_status emcs_run(const emcs_config* cfg, emcs_report** out);
EMCS_API emcs_status emcs_report_write(const emcs_report* report, const char* output_dir);
EMCS_API emcs_status emcs_report_to_json(const emcs_report* report, char** out);
EMCS_API size_t emcs_report_row_count(const emcs_report* report);
EMCS_API emcs_status emcs_report_row(const emcs_report* report, size_t index,
                                     emcs_validity_row* out);
EMCS_API void emcs_report_free(emcs_report* report);

/* Closed-form theory for scenario 1, 2 or 3. A NaN `c` selects the scenario's
   own variance ratio. */
EMCS_API emcs_status emcs_theory_json(int scenario, double c, char** out);

EMCS_API void emcs_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
