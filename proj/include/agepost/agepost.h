/*
 * agepost C API.
 *
 * Every function returns an agepost_status. On failure the detail message is
 * available from agepost_last_error() on the calling thread until the next
 * call into the library. Objects are opaque handles released with their
 * matching *_free function; strings returned through char** are released
 * with agepost_string_free.
 */
#ifndef AGEPOST_H
#define AGEPOST_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define AGEPOST_API __declspec(dllexport)
#else
#define AGEPOST_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum agepost_status {
  AGEPOST_OK = 0,
  AGEPOST_ERR_INVALID_ARGUMENT = 1,
  AGEPOST_ERR_DEGENERATE_EVIDENCE = 2,
  AGEPOST_ERR_FIT_DIVERGED = 3,
  AGEPOST_ERR_INSUFFICIENT_POOL = 4,
  AGEPOST_ERR_EMPTY_SUPPORT = 5,
  AGEPOST_ERR_NO_EVIDENCE = 6,
  AGEPOST_ERR_DIMENSION_MISMATCH = 7,
  AGEPOST_ERR_NON_FINITE_LOSS = 8,
  AGEPOST_ERR_LENGTH_MISMATCH = 9,
  AGEPOST_ERR_DUPLICATE_QUERY = 10,
  AGEPOST_ERR_UNKNOWN_TASK = 11,
  AGEPOST_ERR_TASK_CLOSED = 12,
  AGEPOST_ERR_OUT_OF_ORDER_REFERENCE = 13,
  AGEPOST_ERR_UNKNOWN_REFERENCE = 14,
  AGEPOST_ERR_QUEUE_NOT_EXHAUSTED = 15,
  AGEPOST_ERR_DATA = 16,
  AGEPOST_ERR_IO = 17,
  AGEPOST_ERR_INTERNAL = 99
} agepost_status;

typedef enum agepost_outcome { AGEPOST_YOUNGER = 0, AGEPOST_OLDER = 1 } agepost_outcome;

typedef struct agepost_dist agepost_dist;
typedef struct agepost_head agepost_head;
typedef struct agepost_service agepost_service;

typedef struct agepost_event {
  int ref_age;
  agepost_outcome outcome;
} agepost_event;

AGEPOST_API const char* agepost_version(void);
AGEPOST_API const char* agepost_status_name(agepost_status status);
AGEPOST_API const char* agepost_last_error(void);
AGEPOST_API void agepost_string_free(char* s);

/* ---- posterior core ---------------------------------------------------- */

AGEPOST_API agepost_status agepost_comparison_likelihood(double beta, int ref_age,
                                                         agepost_outcome outcome, int age,
                                                         double* out);

/* Posterior over [min_age, max_age] under a uniform prior. */
AGEPOST_API agepost_status agepost_posterior(int min_age, int max_age, double beta,
                                             const agepost_event* events, size_t n_events,
                                             agepost_dist** out);

AGEPOST_API agepost_status agepost_gt_exact(int min_age, int max_age, int age, agepost_dist** out);
/* hi < 0 means open-ended (runs to max_age). */
AGEPOST_API agepost_status agepost_gt_group(int min_age, int max_age, int lo, int hi,
                                            agepost_dist** out);
AGEPOST_API agepost_status agepost_dist_from_json(const char* json, agepost_dist** out);

AGEPOST_API size_t agepost_dist_size(const agepost_dist* dist);
AGEPOST_API agepost_status agepost_dist_grid(const agepost_dist* dist, int* min_age, int* max_age);
AGEPOST_API agepost_status agepost_dist_mass(const agepost_dist* dist, double* out, size_t len);
AGEPOST_API agepost_status agepost_dist_mode(const agepost_dist* dist, int* age);
AGEPOST_API agepost_status agepost_dist_ci(const agepost_dist* dist, double level, int* lo,
                                           int* hi);
AGEPOST_API agepost_status agepost_dist_is_outlier(const agepost_dist* dist, int* outlier);
AGEPOST_API agepost_status agepost_dist_to_json(const agepost_dist* dist, char** out);
AGEPOST_API void agepost_dist_free(agepost_dist* dist);

AGEPOST_API agepost_status agepost_fit_beta(const int* age_diffs, const double* frac_older,
                                            size_t n, double* beta);

/* ---- ordinal head ------------------------------------------------------- */

/* ranks == 0 selects one threshold per adjacent pair of grid ages. */
AGEPOST_API agepost_status agepost_head_create(int min_age, int max_age, size_t feature_dim,
                                               double beta, size_t ranks, agepost_head** out);
AGEPOST_API agepost_status agepost_head_load(const char* path, agepost_head** out);
AGEPOST_API agepost_status agepost_head_save(const agepost_head* head, const char* path);
AGEPOST_API size_t agepost_head_ranks(const agepost_head* head);
AGEPOST_API size_t agepost_head_feature_dim(const agepost_head* head);
AGEPOST_API agepost_status agepost_head_forward(const agepost_head* head, const double* x,
                                                size_t dim, double* responses, size_t ranks);
AGEPOST_API agepost_status agepost_head_posterior(const agepost_head* head, const double* x,
                                                  size_t dim, agepost_dist** out);
/* use_ohrank != 0 counts thresholds; otherwise returns the posterior mode. */
AGEPOST_API agepost_status agepost_head_predict(const agepost_head* head, const double* x,
                                                size_t dim, int use_ohrank, int* age);
AGEPOST_API void agepost_head_free(agepost_head* head);

/* ---- batch workflows ---------------------------------------------------- */

typedef struct agepost_grid_options {
  int min_age; /* default 0 */
  int max_age; /* default 70 */
  double beta; /* default 0.36 */
} agepost_grid_options;

typedef struct agepost_policy_options {
  int num_below;
  int num_above;
  int gender_match_required;
  int max_age_gap; /* 0 = unlimited */
  uint64_t seed;
} agepost_policy_options;

AGEPOST_API void agepost_grid_options_init(agepost_grid_options* opts);
AGEPOST_API void agepost_policy_options_init(agepost_policy_options* opts);

/* Fits beta to a CSV of age_diff,frac_older rows. */
AGEPOST_API agepost_status agepost_fit_beta_csv(const char* csv_path, double* beta);

typedef struct agepost_catalog_options {
  agepost_grid_options grid;
  size_t num_queries;
  int refs_per_age;
  double hint_noise;
  uint64_t seed;
  const char* queries_out;
  const char* refs_out;
} agepost_catalog_options;

AGEPOST_API void agepost_catalog_options_init(agepost_catalog_options* opts);
AGEPOST_API agepost_status agepost_run_synth_catalog(const agepost_catalog_options* opts);

typedef struct agepost_label_options {
  agepost_grid_options grid;
  agepost_policy_options policy;
  const char* queries_path;
  const char* refs_path;
  const char* out_path;  /* JSON lines of annotation records; NULL to skip */
  double annotator_beta; /* simulated annotator steepness */
  int annotator_truthful;
  int allow_fallback;
  uint64_t seed;
  const char* service_url; /* when set, posts tasks to a running service instead */
} agepost_label_options;

typedef struct agepost_label_summary {
  size_t labelled;
  size_t discarded;
  size_t tasks_created;
  size_t tasks_failed;
} agepost_label_summary;

AGEPOST_API void agepost_label_options_init(agepost_label_options* opts);
AGEPOST_API agepost_status agepost_run_label(const agepost_label_options* opts,
                                             agepost_label_summary* summary);

typedef struct agepost_simulate_options {
  agepost_grid_options grid;
  double annotator_beta;
  int annotator_truthful;
  int max_age_gap;
  int trials;
  uint64_t seed;
} agepost_simulate_options;

AGEPOST_API void agepost_simulate_options_init(agepost_simulate_options* opts);
/* Returns the narrowing table as CSV. */
AGEPOST_API agepost_status agepost_run_simulate(const agepost_simulate_options* opts, char** csv);

typedef struct agepost_dataset_options {
  const char* path; /* JSON-lines dataset; NULL for synthetic */
  size_t n;
  uint64_t seed;
  size_t dim;
} agepost_dataset_options;

typedef struct agepost_train_options {
  agepost_grid_options grid;
  agepost_dataset_options data;
  const char* loss; /* "both" | "hyper" | "kl" */
  double learning_rate;
  int epochs;
  int batch_size;
  uint64_t seed;
  const char* checkpoint_out;
  const char* trace_out; /* loss CSV; NULL to skip */
} agepost_train_options;

AGEPOST_API void agepost_train_options_init(agepost_train_options* opts);
/* Returns a JSON summary (final losses, epochs). */
AGEPOST_API agepost_status agepost_run_train(const agepost_train_options* opts, char** summary);

typedef struct agepost_eval_options {
  const char* checkpoint;
  agepost_dataset_options data;
  const char* loss; /* selects the inference path */
  const char* annotations_path; /* alternative: score annotation modes */
  const char* queries_path;     /* truth (true_age) for annotations */
} agepost_eval_options;

AGEPOST_API void agepost_eval_options_init(agepost_eval_options* opts);
/* Returns the metric report as JSON. */
AGEPOST_API agepost_status agepost_run_eval(const agepost_eval_options* opts, char** report);

/* Writes a synthetic training set as JSON lines. */
AGEPOST_API agepost_status agepost_run_synth_data(const agepost_grid_options* grid,
                                                  const agepost_dataset_options* data,
                                                  const char* out_path);

/* ---- annotation service -------------------------------------------------- */

typedef struct agepost_service_options {
  agepost_grid_options grid;
  agepost_policy_options policy;
  const char* refs_path;
  const char* data_dir;
  size_t snapshot_every;
  int fsync;
} agepost_service_options;

AGEPOST_API void agepost_service_options_init(agepost_service_options* opts);
AGEPOST_API agepost_status agepost_service_open(const agepost_service_options* opts,
                                                agepost_service** out);
/* In-process request against the HTTP routing table. */
AGEPOST_API agepost_status agepost_service_call(agepost_service* svc, const char* method,
                                                const char* path, const char* body,
                                                int* http_status, char** response);
/* Binds the listener; port 0 picks a free port, reported through bound_port. */
AGEPOST_API agepost_status agepost_service_bind(agepost_service* svc, const char* host, int port,
                                                int* bound_port);
/* Serves until agepost_service_stop is called from another thread. */
AGEPOST_API agepost_status agepost_service_serve(agepost_service* svc);
AGEPOST_API void agepost_service_stop(agepost_service* svc);
AGEPOST_API void agepost_service_free(agepost_service* svc);

#ifdef __cplusplus
}
#endif

#endif /* AGEPOST_H */
