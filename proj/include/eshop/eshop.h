/*
 * eshop: early-scheduled handover preparation experiments.
 *
 * C interface over opaque handles. Every call returns an eshop_status; on
 * failure eshop_last_error() holds a message for the calling thread.
 */
#ifndef ESHOP_ESHOP_H
#define ESHOP_ESHOP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(ESHOP_BUILDING_LIBRARY)
#    define ESHOP_API __declspec(dllexport)
#  else
#    define ESHOP_API __declspec(dllimport)
#  endif
#else
#  define ESHOP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum eshop_status {
    ESHOP_OK = 0,
    ESHOP_ERR_INTERNAL = 1,
    ESHOP_ERR_CONFIG = 2,
    ESHOP_ERR_DATA = 3,
    ESHOP_ERR_NUMERIC = 4
} eshop_status;

typedef struct eshop_experiment eshop_experiment;
typedef struct eshop_model eshop_model;

typedef void (*eshop_log_fn)(const char* line, void* user);

ESHOP_API const char* eshop_version(void);

/* Message of the last failed call on this thread; "" when none. */
ESHOP_API const char* eshop_last_error(void);

/*
 * config_path may be NULL: then <out_dir>/config.json is used when present,
 * defaults otherwise. out_dir may be NULL to keep the configured output_dir.
 */
ESHOP_API eshop_status eshop_experiment_create(const char* config_path, const char* out_dir,
                                               eshop_experiment** out);
ESHOP_API void eshop_experiment_destroy(eshop_experiment* exp);

ESHOP_API eshop_status eshop_experiment_set_seed(eshop_experiment* exp, uint64_t seed);
/* los: 1 line-of-sight, 0 non-line-of-sight */
ESHOP_API eshop_status eshop_experiment_set_los(eshop_experiment* exp, int los);
ESHOP_API eshop_status eshop_experiment_set_parallel(eshop_experiment* exp, int threads);
ESHOP_API eshop_status eshop_experiment_set_log(eshop_experiment* exp, eshop_log_fn fn,
                                                void* user);

/* Writes the 16 hex digit config hash plus NUL; len must be >= 17. */
ESHOP_API eshop_status eshop_experiment_config_hash(const eshop_experiment* exp, char* buf,
                                                    size_t len);
/* Configuration as JSON text. Caller frees with eshop_string_free. */
ESHOP_API eshop_status eshop_experiment_config_json(const eshop_experiment* exp, char** out);
ESHOP_API void eshop_string_free(char* s);

ESHOP_API eshop_status eshop_simulate(eshop_experiment* exp);
ESHOP_API eshop_status eshop_build_dataset(eshop_experiment* exp);
ESHOP_API eshop_status eshop_train(eshop_experiment* exp);
ESHOP_API eshop_status eshop_eval(eshop_experiment* exp);
/* oracle != 0 drives the trigger with the label countdown instead of the model. */
ESHOP_API eshop_status eshop_run_eshop(eshop_experiment* exp, int oracle);

ESHOP_API eshop_status eshop_report(const char* const* run_dirs, size_t n_runs, const char* out_dir,
                                    eshop_log_fn fn, void* user);

ESHOP_API eshop_status eshop_model_load(const char* path, eshop_model** out);
ESHOP_API void eshop_model_destroy(eshop_model* model);
ESHOP_API eshop_status eshop_model_param_count(const eshop_model* model, size_t* out);
ESHOP_API eshop_status eshop_model_receptive_field(const eshop_model* model, long* out);
ESHOP_API eshop_status eshop_model_window_len(const eshop_model* model, int* out);
ESHOP_API eshop_status eshop_model_num_features(const eshop_model* model, int* out);

/*
 * Countdown in seconds for one window of raw report features, window_len rows
 * of num_features values, oldest first. Standardization is applied internally.
 * A row whose first value is NaN marks padding before the segment start.
 */
ESHOP_API eshop_status eshop_model_predict(const eshop_model* model, const double* raw_window,
                                           size_t n_values, double* out_tef_s);

#ifdef __cplusplus
}
#endif

#endif
