/*
 * adoptfit C API.
 *
 * Every function returns an adoptfit_status. On failure a message describing
 * the error is available from adoptfit_last_error() on the calling thread.
 * Handles are opaque; each *_create has a matching *_destroy.
 */
#ifndef ADOPTFIT_H
#define ADOPTFIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(ADOPTFIT_BUILDING_LIBRARY)
#define ADOPTFIT_API __attribute__((visibility("default")))
#else
#define ADOPTFIT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum adoptfit_status {
  ADOPTFIT_OK = 0,
  ADOPTFIT_ERR_DOMAIN = 1,
  ADOPTFIT_ERR_VALIDATION = 2,
  ADOPTFIT_ERR_INSUFFICIENT_DATA = 3,
  ADOPTFIT_ERR_UNREACHABLE = 4,
  ADOPTFIT_ERR_NOT_FOUND = 5,
  ADOPTFIT_ERR_IO = 6,
  ADOPTFIT_ERR_TRANSIENT = 7,
  ADOPTFIT_ERR_PERMANENT = 8,
  ADOPTFIT_ERR_REFUSED = 9,
  ADOPTFIT_ERR_INTERNAL = 10,
  ADOPTFIT_ERR_NULL_ARGUMENT = 11
} adoptfit_status;

/* Short machine-readable name, e.g. "validation". */
ADOPTFIT_API const char* adoptfit_status_name(adoptfit_status status);

/* Message of the last failed call on this thread ("" if none). */
ADOPTFIT_API const char* adoptfit_last_error(void);

/* ------------------------------------------------------------------------ */
/* Adoption curve */

typedef struct adoptfit_params {
  double lambda;
  double mu;
  double sigma;
  double m;
} adoptfit_params;

ADOPTFIT_API adoptfit_status adoptfit_std_normal_cdf(double x, double* out);
ADOPTFIT_API adoptfit_status adoptfit_std_normal_quantile(double p, double* out);
ADOPTFIT_API adoptfit_status adoptfit_evaluate(const adoptfit_params* params, double t, double* value,
                                               int* saturated);
ADOPTFIT_API adoptfit_status adoptfit_ceiling(const adoptfit_params* params, double* value, int* saturated);
/* On ADOPTFIT_ERR_UNREACHABLE, *ceiling_out (if given) receives the ceiling. */
ADOPTFIT_API adoptfit_status adoptfit_invert_time(const adoptfit_params* params, double target, double* t_out,
                                                  double* ceiling_out);
/* out[0..2] = partials with respect to lambda, mu, sigma. */
ADOPTFIT_API adoptfit_status adoptfit_gradient(const adoptfit_params* params, double t, double out[3]);

/* ------------------------------------------------------------------------ */
/* Fitting */

typedef enum adoptfit_fit_status {
  ADOPTFIT_FIT_CONVERGED = 0,
  ADOPTFIT_FIT_FAILED_SENTINEL = 1,
  ADOPTFIT_FIT_BOUND_DEGENERATE = 2
} adoptfit_fit_status;

typedef struct adoptfit_fit_options {
  double lambda_low, lambda_high;
  double mu_low, mu_high;
  double sigma_low, sigma_high;
  int max_iterations;
  int n_restarts;
  double convergence_tol;
  uint64_t rng_seed;
  double m;
} adoptfit_fit_options;

typedef struct adoptfit_fit_result {
  adoptfit_params params;
  adoptfit_fit_status status;
  double rmse_log;
  size_t n_points;
  int n_restarts_used;
} adoptfit_fit_result;

ADOPTFIT_API void adoptfit_fit_options_default(adoptfit_fit_options* options);

/* Fits cumulative[0..n) observed at t_k = offset + k + 1. options may be NULL. */
ADOPTFIT_API adoptfit_status adoptfit_fit_series(const double* cumulative, size_t n, double offset_buckets,
                                                 const adoptfit_fit_options* options, adoptfit_fit_result* result);

/* ------------------------------------------------------------------------ */
/* Analytics on in-memory data */

ADOPTFIT_API adoptfit_status adoptfit_pareto_concentration(const double* values, size_t n, double mass_threshold,
                                                           double* item_fraction, size_t* item_count);

/* ------------------------------------------------------------------------ */
/* Output buffers */

typedef struct adoptfit_buffer adoptfit_buffer;

ADOPTFIT_API adoptfit_buffer* adoptfit_buffer_create(void);
ADOPTFIT_API void adoptfit_buffer_destroy(adoptfit_buffer* buffer);
ADOPTFIT_API const char* adoptfit_buffer_data(const adoptfit_buffer* buffer);
ADOPTFIT_API size_t adoptfit_buffer_size(const adoptfit_buffer* buffer);

/* ------------------------------------------------------------------------ */
/* Dataset pipeline */

typedef struct adoptfit_context adoptfit_context;

ADOPTFIT_API adoptfit_status adoptfit_context_create(adoptfit_context** out);
ADOPTFIT_API void adoptfit_context_destroy(adoptfit_context* ctx);

/* Keys: base_url, auth_token, page_size, max_parallel_fetches,
   early_cutoff_date, name_match_min_length, dataset_root. */
ADOPTFIT_API adoptfit_status adoptfit_context_set(adoptfit_context* ctx, const char* key, const char* value);
ADOPTFIT_API adoptfit_status adoptfit_context_load_config(adoptfit_context* ctx, const char* path);
/* Reads REGISTRY_URL, REGISTRY_TOKEN and DATASET_ROOT. */
ADOPTFIT_API adoptfit_status adoptfit_context_apply_env(adoptfit_context* ctx);
/* Serves the fixture directory locally and points base_url at it. */
ADOPTFIT_API adoptfit_status adoptfit_context_use_fixture(adoptfit_context* ctx, const char* directory);

/* "series kind" arguments are "finetunes" or "downloads";
   "format" arguments are "csv", "jsonl" or "svg". */

ADOPTFIT_API adoptfit_status adoptfit_ingest(adoptfit_context* ctx, const char* const* organizations,
                                             size_t n_organizations, const char* const* bases, size_t n_bases,
                                             int include_early, adoptfit_buffer* out);

/* date is YYYY-MM-DD or NULL for today (UTC). */
ADOPTFIT_API adoptfit_status adoptfit_snapshot(adoptfit_context* ctx, const char* const* ids, size_t n_ids,
                                               const char* date, adoptfit_buffer* out);

/* as_of is an RFC 3339 instant or NULL. */
ADOPTFIT_API adoptfit_status adoptfit_build_series(adoptfit_context* ctx, const char* series_kind,
                                                   double bucket_length_days, const char* as_of, int include_early,
                                                   const char* const* extra_bases, size_t n_extra_bases,
                                                   adoptfit_buffer* out);

/* subject NULL fits every stored series of the kind. options may be NULL. */
ADOPTFIT_API adoptfit_status adoptfit_fit(adoptfit_context* ctx, const char* subject, const char* series_kind,
                                          const adoptfit_fit_options* options, adoptfit_buffer* out);

/* series_kind NULL or "auto" prefers the downloads fit when one exists. */
ADOPTFIT_API adoptfit_status adoptfit_forecast(adoptfit_context* ctx, const char* subject, const char* series_kind,
                                               const double* targets, size_t n_targets, const double* horizons,
                                               size_t n_horizons, adoptfit_buffer* out);

ADOPTFIT_API adoptfit_status adoptfit_analyze_pareto(adoptfit_context* ctx, const char* series_kind,
                                                     double threshold, const char* format, adoptfit_buffer* out);

/* range_low/range_high are ignored unless has_range is nonzero. */
ADOPTFIT_API adoptfit_status adoptfit_analyze_params(adoptfit_context* ctx, const char* series_kind,
                                                     const char* scale, size_t bin_count, int has_range,
                                                     double range_low, double range_high, const char* format,
                                                     adoptfit_buffer* out);

ADOPTFIT_API adoptfit_status adoptfit_analyze_pairwise(adoptfit_context* ctx, const char* series_kind,
                                                       const char* format, adoptfit_buffer* out);

ADOPTFIT_API adoptfit_status adoptfit_analyze_org_density(adoptfit_context* ctx, const char* series_kind,
                                                          const size_t* horizons, size_t n_horizons,
                                                          double fitness_low, double fitness_high, size_t grid_size,
                                                          const char* format, adoptfit_buffer* out);

#ifdef __cplusplus
}
#endif

#endif /* ADOPTFIT_H */
