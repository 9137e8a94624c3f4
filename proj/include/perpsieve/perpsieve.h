#ifndef PERPSIEVE_H
#define PERPSIEVE_H

/* C interface to the perpsieve library. Structured inputs and outputs are JSON
 * text. Strings returned through char** are owned by the caller and released
 * with ps_string_free. On failure the status is non-zero and ps_last_error()
 * describes the problem (thread-local, valid until the next call). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PS_API __declspec(dllexport)
#else
#define PS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ps_status {
    PS_OK = 0,
    PS_ERR_INVALID_ARGUMENT = 1,
    PS_ERR_DATA_VALIDATION = 2,
    PS_ERR_NUMERICAL = 3,
    PS_ERR_IO = 4,
    PS_ERR_SCHEMA = 5,
    PS_ERR_INTERNAL = 6
} ps_status;

typedef enum ps_guard_decision { PS_GUARD_OK = 0, PS_GUARD_WATCH = 1, PS_GUARD_KILL = 2 } ps_guard_decision;

typedef struct ps_bars ps_bars;
typedef struct ps_funding ps_funding;
typedef struct ps_result ps_result;
typedef struct ps_study ps_study;
typedef struct ps_guard ps_guard;

typedef struct ps_ledger_row {
    int64_t timestamp;
    int signal;
    double exposure;
    double r_mkt;
    double r_raw;
    double c_fee;
    double c_slip;
    double c_fund;
    double r_net;
} ps_ledger_row;

typedef struct ps_guard_row {
    int64_t timestamp;
    double r_net;
    double exposure;
} ps_guard_row;

PS_API const char* ps_version(void);
PS_API const char* ps_last_error(void);
PS_API void ps_string_free(char* s);

/* canonical-JSON SHA-256 of a document */
PS_API ps_status ps_digest_json(const char* json, char** hex_out);
PS_API ps_status ps_defaults_json(char** json_out);

/* cost scenario grid for a profile: [{label, profile}] in fee-major order */
PS_API ps_status ps_scenarios(const char* profile_json, char** json_out);

/* market data */
PS_API ps_status ps_bars_load_csv(const char* path, int freq_hours, ps_bars** out);
PS_API ps_status ps_bars_synthesize(const char* settings_json, ps_bars** out);
PS_API ps_status ps_bars_resample(const ps_bars* bars, int freq_hours, ps_bars** out);
PS_API ps_status ps_bars_write_csv(const ps_bars* bars, const char* path);
PS_API ps_status ps_bars_validate(const ps_bars* bars, size_t gap_tolerance, char** report_json);
PS_API ps_status ps_bars_full_window(const ps_bars* bars, const char* name, char** window_json);
PS_API size_t ps_bars_count(const ps_bars* bars);
PS_API void ps_bars_free(ps_bars* bars);

PS_API ps_status ps_funding_load_csv(const char* path, double fallback_rate, ps_funding** out);
PS_API ps_status ps_funding_synthesize(const ps_bars* bars, const char* settings_json, ps_funding** out);
PS_API ps_status ps_funding_write_csv(const ps_funding* funding, const char* path);
PS_API void ps_funding_free(ps_funding* funding);

/* backtests; semantics is "strict" or "naive" */
PS_API ps_status ps_backtest(const ps_bars* bars, const ps_funding* funding, const char* params_json,
                             const char* profile_json, const char* window_json, const char* semantics,
                             ps_result** out);
PS_API ps_status ps_result_metrics(const ps_result* result, double rf_annual, char** metrics_json);
PS_API ps_status ps_result_write_ledger(const ps_result* result, const char* path, const char* run_id);
PS_API size_t ps_result_rows(const ps_result* result);
PS_API ps_status ps_result_row(const ps_result* result, size_t index, ps_ledger_row* row);
PS_API ps_status ps_result_dd_overlay(const ps_result* result, const char* policy_json, ps_result** out);
PS_API void ps_result_free(ps_result* result);

/* Stage I search. request: {profile, window, sampler, budget, seed, tpe} */
PS_API ps_status ps_study_run(const ps_bars* bars, const ps_funding* funding, const char* request_json,
                              ps_study** out);
PS_API ps_status ps_study_write(const ps_study* study, const char* study_csv, const char* best_so_far_csv,
                                const char* run_id);
PS_API ps_status ps_study_summary(const ps_study* study, char** summary_json);
PS_API void ps_study_free(ps_study* study);

/* Stage II. request: {pool_csv, pool_size, profile, window, policy, scenarios, rolling, threshold_scan, outputs} */
PS_API ps_status ps_screen(const ps_bars* bars, const ps_funding* funding, const char* request_json,
                           char** report_json);

/* diagnostics */
PS_API ps_status ps_dsr(const char* request_json, char** result_json);
PS_API ps_status ps_dsr_from_pool(const ps_bars* bars, const ps_funding* funding, const char* request_json,
                                  char** result_json);
PS_API ps_status ps_pbo(const ps_bars* bars, const ps_funding* funding, const char* request_json,
                        char** result_json);
PS_API ps_status ps_pbo_matrix(const double* values, size_t rows, size_t cols, size_t n_segments,
                               char** result_json);
PS_API ps_status ps_bootstrap(const double* a, const double* b, size_t n, size_t block_len, size_t n_boot,
                              double level, uint64_t seed, char** result_json);
PS_API ps_status ps_bootstrap_backtest(const ps_bars* bars, const ps_funding* funding, const char* request_json,
                                       char** result_json);
PS_API ps_status ps_ablation(const ps_bars* bars, const ps_funding* funding, const char* request_json,
                             char** result_json);
PS_API ps_status ps_uplift(const ps_bars* bars, const ps_funding* funding, const char* request_json,
                           char** result_json);

/* full-chain audit of a ledger CSV against a replay */
PS_API ps_status ps_audit_replay(const ps_bars* bars, const ps_funding* funding, const char* request_json,
                                 const char* ledger_csv, double tolerance, char** report_json);

/* ok / watch / kill guard */
PS_API ps_status ps_guard_create(const char* config_json, ps_guard** out);
PS_API ps_status ps_guard_step(ps_guard* guard, const ps_guard_row* rows, size_t n, ps_guard_decision* decisions,
                               double* exposure_out);
PS_API ps_status ps_guard_resume(ps_guard* guard);
PS_API ps_guard_decision ps_guard_state(const ps_guard* guard);
PS_API ps_status ps_guard_write_log(const ps_guard* guard, const char* path, const char* run_id);
PS_API void ps_guard_free(ps_guard* guard);

#ifdef __cplusplus
}
#endif

#endif
