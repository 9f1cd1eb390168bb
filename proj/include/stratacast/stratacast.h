#ifndef STRATACAST_H
#define STRATACAST_H

#include <stddef.h>
#include <stdint.h>

#if defined(STRATACAST_BUILDING)
#define STRATACAST_API __attribute__((visibility("default")))
#else
#define STRATACAST_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sc_status {
  SC_OK = 0,
  SC_ERR_INVALID_ARGUMENT = 1,
  SC_ERR_IO = 2,
  SC_ERR_DATA = 3,
  SC_ERR_NUMERIC = 4,
  SC_ERR_INTERNAL = 5
} sc_status;

typedef struct sc_experiment sc_experiment;
typedef struct sc_dataset sc_dataset;
typedef struct sc_selection sc_selection;
typedef struct sc_forecaster sc_forecaster;
typedef struct sc_forecast sc_forecast;
typedef struct sc_metrics sc_metrics;

/* Message for the last failed call on this thread; "" after a success. */
STRATACAST_API const char* sc_last_error(void);
STRATACAST_API const char* sc_version(void);
/* Applies STRATACAST_LOG; called implicitly by every entry point. */
STRATACAST_API void sc_init_logging(void);

/* Experiment configuration (JSON file; relative paths resolve against it). */
STRATACAST_API sc_status sc_experiment_load(const char* config_path, sc_experiment** out);
STRATACAST_API void sc_experiment_free(sc_experiment* exp);
STRATACAST_API sc_status sc_experiment_set_seed(sc_experiment* exp, uint64_t seed);
STRATACAST_API sc_status sc_experiment_set_fraction(sc_experiment* exp, double fraction);
STRATACAST_API sc_status sc_experiment_set_members(sc_experiment* exp, size_t n_members);
STRATACAST_API sc_status sc_experiment_set_steps(sc_experiment* exp, size_t n_steps);
STRATACAST_API sc_status sc_experiment_set_jobs(sc_experiment* exp, size_t jobs);
STRATACAST_API sc_status sc_experiment_set_flat_grid(sc_experiment* exp, int flat);
STRATACAST_API sc_status sc_experiment_set_output_dir(sc_experiment* exp, const char* dir);
/* Replaces the strategy list; Full Data is always kept. */
STRATACAST_API sc_status sc_experiment_set_strategies(sc_experiment* exp, const char* const* names, size_t n);
STRATACAST_API uint64_t sc_experiment_seed(const sc_experiment* exp);
STRATACAST_API sc_status sc_experiment_output_dir(const sc_experiment* exp, char* buf, size_t cap);

/* Synthetic data: writes <out_dir>/dataset.ften and its sidecars. A non-NULL
   `seed` overrides the generator seed in the config. */
STRATACAST_API sc_status sc_generate_dataset(const char* synthetic_config_path, const char* out_dir,
                                             const uint64_t* seed);

STRATACAST_API sc_status sc_dataset_load(const char* path, sc_dataset** out);
STRATACAST_API void sc_dataset_free(sc_dataset* ds);
STRATACAST_API size_t sc_dataset_n_time(const sc_dataset* ds);
STRATACAST_API size_t sc_dataset_n_var(const sc_dataset* ds);
STRATACAST_API size_t sc_dataset_n_cells(const sc_dataset* ds);

/* Selection over the experiment's training candidates. */
STRATACAST_API sc_status sc_select(sc_experiment* exp, const char* strategy, uint64_t seed, sc_selection** out);
STRATACAST_API sc_status sc_selection_load(const char* path, sc_selection** out);
STRATACAST_API sc_status sc_selection_save(const sc_selection* sel, const char* path);
STRATACAST_API size_t sc_selection_count(const sc_selection* sel);
/* Copies min(cap, count) dataset time indices; returns the count copied. */
STRATACAST_API size_t sc_selection_indices(const sc_selection* sel, size_t* buf, size_t cap);
STRATACAST_API void sc_selection_free(sc_selection* sel);

STRATACAST_API sc_status sc_train(sc_experiment* exp, const sc_selection* sel, uint64_t seed, sc_forecaster** out);
STRATACAST_API sc_status sc_forecaster_load(const char* path, sc_forecaster** out);
STRATACAST_API sc_status sc_forecaster_save(const sc_forecaster* model, const char* path);
STRATACAST_API const char* sc_forecaster_kind(const sc_forecaster* model);
STRATACAST_API void sc_forecaster_free(sc_forecaster* model);

/* Ensemble over the experiment's evaluation inits with its member and step counts. */
STRATACAST_API sc_status sc_rollout(sc_experiment* exp, const sc_forecaster* model, uint64_t seed, sc_forecast** out);
STRATACAST_API sc_status sc_forecast_load(const char* path, sc_forecast** out);
STRATACAST_API sc_status sc_forecast_save(const sc_forecast* fc, const char* path);
STRATACAST_API size_t sc_forecast_n_inits(const sc_forecast* fc);
STRATACAST_API size_t sc_forecast_n_members(const sc_forecast* fc);
STRATACAST_API size_t sc_forecast_n_steps(const sc_forecast* fc);
STRATACAST_API void sc_forecast_free(sc_forecast* fc);

/* Scores at every lead up to 10 days, in physical units. */
STRATACAST_API sc_status sc_evaluate(sc_experiment* exp, const sc_forecast* fc, const char* method, sc_metrics** out);
STRATACAST_API sc_status sc_metrics_load(const char* csv_path, sc_metrics** out);
STRATACAST_API sc_status sc_metrics_save(const sc_metrics* m, const char* csv_path);
STRATACAST_API size_t sc_metrics_count(const sc_metrics* m);
STRATACAST_API void sc_metrics_free(sc_metrics* m);

/* Full pipeline into the experiment's output directory. `out` may be NULL. */
STRATACAST_API sc_status sc_run_experiment(sc_experiment* exp, sc_metrics** out);
STRATACAST_API sc_status sc_emit_report(const sc_metrics* m, const int* leads, size_t n_leads, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif
