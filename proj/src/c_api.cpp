#include "adoptfit/adoptfit.h"

#include "adoptfit/analytics.hpp"
#include "adoptfit/config.hpp"
#include "adoptfit/curve_model.hpp"
#include "adoptfit/error.hpp"
#include "adoptfit/fitter.hpp"
#include "adoptfit/pipeline.hpp"
#include "adoptfit/registry.hpp"

#include <cstdlib>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

using namespace adoptfit;

struct adoptfit_buffer
{
  std::string text;
};

struct adoptfit_context
{
  Settings settings;
  std::unique_ptr<FixtureRegistry> fixture;
};

namespace {

thread_local std::string g_last_error;

adoptfit_status code_of(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::domain: return ADOPTFIT_ERR_DOMAIN;
    case ErrorKind::validation: return ADOPTFIT_ERR_VALIDATION;
    case ErrorKind::insufficient_data: return ADOPTFIT_ERR_INSUFFICIENT_DATA;
    case ErrorKind::unreachable: return ADOPTFIT_ERR_UNREACHABLE;
    case ErrorKind::not_found: return ADOPTFIT_ERR_NOT_FOUND;
    case ErrorKind::io: return ADOPTFIT_ERR_IO;
    case ErrorKind::transient: return ADOPTFIT_ERR_TRANSIENT;
    case ErrorKind::permanent: return ADOPTFIT_ERR_PERMANENT;
    case ErrorKind::refused: return ADOPTFIT_ERR_REFUSED;
    case ErrorKind::internal: return ADOPTFIT_ERR_INTERNAL;
  }
  return ADOPTFIT_ERR_INTERNAL;
}

// Runs `body`, translating exceptions into status codes.
template <class F>
adoptfit_status guarded(F&& body)
{
  try {
    body();
    g_last_error.clear();
    return ADOPTFIT_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return code_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return ADOPTFIT_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ADOPTFIT_ERR_INTERNAL;
  }
}

void require(const void* p, const char* name)
{
  if (!p)
    fail(ErrorKind::validation, std::string("null argument: ") + name);
}

FitParams to_cpp(const adoptfit_params* p)
{
  require(p, "params");
  return {p->lambda, p->mu, p->sigma, p->m};
}

FitOptions to_cpp(const adoptfit_fit_options* o)
{
  FitOptions out;
  if (!o)
    return out;
  out.bounds.lambda = {o->lambda_low, o->lambda_high};
  out.bounds.mu = {o->mu_low, o->mu_high};
  out.bounds.sigma = {o->sigma_low, o->sigma_high};
  out.max_iterations = o->max_iterations;
  out.n_restarts = o->n_restarts;
  out.convergence_tol = o->convergence_tol;
  out.rng_seed = o->rng_seed;
  out.m = o->m;
  return out;
}

std::vector<std::string> strings(const char* const* items, size_t n)
{
  std::vector<std::string> out;
  if (n > 0)
    require(items, "string array");
  for (size_t i = 0; i < n; ++i) {
    require(items[i], "string array element");
    out.emplace_back(items[i]);
  }
  return out;
}

void put(adoptfit_buffer* out, std::string text)
{
  require(out, "out");
  out->text = std::move(text);
}

Pipeline pipeline_of(adoptfit_context* ctx)
{
  require(ctx, "ctx");
  return Pipeline(ctx->settings);
}

SeriesKind kind_arg(const char* text)
{
  require(text, "series_kind");
  return parse_series_kind(text);
}

OutputFormat format_arg(const char* text)
{
  return text ? parse_output_format(text) : OutputFormat::csv;
}

} // namespace

extern "C" {

const char* adoptfit_status_name(adoptfit_status status)
{
  switch (status) {
    case ADOPTFIT_OK: return "ok";
    case ADOPTFIT_ERR_DOMAIN: return "domain";
    case ADOPTFIT_ERR_VALIDATION: return "validation";
    case ADOPTFIT_ERR_INSUFFICIENT_DATA: return "insufficient_data";
    case ADOPTFIT_ERR_UNREACHABLE: return "unreachable";
    case ADOPTFIT_ERR_NOT_FOUND: return "not_found";
    case ADOPTFIT_ERR_IO: return "io";
    case ADOPTFIT_ERR_TRANSIENT: return "transient";
    case ADOPTFIT_ERR_PERMANENT: return "permanent";
    case ADOPTFIT_ERR_REFUSED: return "refused";
    case ADOPTFIT_ERR_INTERNAL: return "internal";
    case ADOPTFIT_ERR_NULL_ARGUMENT: return "null_argument";
  }
  return "internal";
}

const char* adoptfit_last_error(void)
{
  return g_last_error.c_str();
}

adoptfit_status adoptfit_std_normal_cdf(double x, double* out)
{
  if (!out)
    return ADOPTFIT_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = std_normal_cdf(x); });
}

adoptfit_status adoptfit_std_normal_quantile(double p, double* out)
{
  if (!out)
    return ADOPTFIT_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = std_normal_quantile(p); });
}

adoptfit_status adoptfit_evaluate(const adoptfit_params* params, double t, double* value, int* saturated)
{
  if (!params || !value)
    return ADOPTFIT_ERR_NULL_ARGUMENT;
  return guarded([&] {
    CurveValue v = evaluate(to_cpp(params), t);
    *value = v.value;
    if (saturated)
      *saturated = v.saturated ? 1 : 0;
  });
}

adoptfit_status adoptfit_ceiling(const adoptfit_params* params, double* value, int* saturated)
{
  if (!params || !value)
    return ADOPTFIT_ERR_NULL_ARGUMENT;
  return guarded([&] {
    CurveValue v = ceiling(to_cpp(params));
    *value = v.value;
    if (saturated)
      *saturated = v.saturated ? 1 : 0;
  });
}

adoptfit_status adoptfit_invert_time(const adoptfit_params* params, double target, double* t_out,
                                     double* ceiling_out)
{
  if (!params || !t_out)
    return ADOPTFIT_ERR_NULL_ARGUMENT;
  try {
    *t_out = invert_time(to_cpp(params), target);
    g_last_error.clear();
    return ADOPTFIT_OK;
  } catch (const UnreachableTarget& e) {
    g_last_error = e.what();
    if (ceiling_out)
      *ceiling_out = e.ceiling();
    return ADOPTFIT_ERR_UNREACHABLE;
  } catch (const Error& e) {
    g_last_error = e.what();
    return code_of(e.kind());
  }
}

adoptfit_status adoptfit_gradient(const adoptfit_params* params, double t, double out[3])
{
  if (!params || !out)
    return ADOPTFIT_ERR_NULL_ARGUMENT;
  return guarded([&] {
    Gradient g = gradient(to_cpp(params), t);
    out[0] = g.d_lambda;
    out[1] = g.d_mu;
    out[2] = g.d_sigma;
  });
}

void adoptfit_fit_options_default(adoptfit_fit_options* options)
{
  if (!options)
    return;
  FitOptions d;
  options->lambda_low = d.bounds.lambda.low;
  options->lambda_high = d.bounds.lambda.high;
  options->mu_low = d.bounds.mu.low;
  options->mu_high = d.bounds.mu.high;
  options->sigma_low = d.bounds.sigma.low;
  options->sigma_high = d.bounds.sigma.high;
  options->max_iterations = d.max_iterations;
  options->n_restarts = d.n_restarts;
  options->convergence_tol = d.convergence_tol;
  options->rng_seed = d.rng_seed;
  options->m = d.m;
}

adoptfit_status adoptfit_fit_series(const double* cumulative, size_t n, double offset_buckets,
                                    const adoptfit_fit_options* options, adoptfit_fit_result* result)
{
  if ((!cumulative && n > 0) || !result)
    return ADOPTFIT_ERR_NULL_ARGUMENT;
  return guarded([&] {
    AdoptionSeries series;
    series.subject_id = "c-api";
    series.cumulative.assign(cumulative, cumulative + n);
    series.observation_offset_buckets = offset_buckets;
    FitResult r = fit_series(series, to_cpp(options));
    result->params = {r.params.lambda, r.params.mu, r.params.sigma, r.params.m};
    result->status = static_cast<adoptfit_fit_status>(r.status);
    result->rmse_log = r.rmse_log;
    result->n_points = r.n_points;
    result->n_restarts_used = r.n_restarts_used;
  });
}

adoptfit_status adoptfit_pareto_concentration(const double* values, size_t n, double mass_threshold,
                                              double* item_fraction, size_t* item_count)
{
  if ((!values && n > 0) || !item_fraction || !item_count)
    return ADOPTFIT_ERR_NULL_ARGUMENT;
  return guarded([&] {
    ParetoResult r = pareto_concentration(std::span<const double>(values, n), mass_threshold);
    *item_fraction = r.item_fraction;
    *item_count = r.item_count;
  });
}

adoptfit_buffer* adoptfit_buffer_create(void)
{
  return new (std::nothrow) adoptfit_buffer;
}

void adoptfit_buffer_destroy(adoptfit_buffer* buffer)
{
  delete buffer;
}

const char* adoptfit_buffer_data(const adoptfit_buffer* buffer)
{
  return buffer ? buffer->text.c_str() : "";
}

size_t adoptfit_buffer_size(const adoptfit_buffer* buffer)
{
  return buffer ? buffer->text.size() : 0;
}

adoptfit_status adoptfit_context_create(adoptfit_context** out)
{
  if (!out)
    return ADOPTFIT_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = new adoptfit_context; });
}

void adoptfit_context_destroy(adoptfit_context* ctx)
{
  delete ctx;
}

adoptfit_status adoptfit_context_set(adoptfit_context* ctx, const char* key, const char* value)
{
  if (!ctx || !key || !value)
    return ADOPTFIT_ERR_NULL_ARGUMENT;
  return guarded([&] { set_option(ctx->settings, key, value); });
}

adoptfit_status adoptfit_context_load_config(adoptfit_context* ctx, const char* path)
{
  if (!ctx || !path)
    return ADOPTFIT_ERR_NULL_ARGUMENT;
  return guarded([&] { apply_config_file(ctx->settings, path); });
}

adoptfit_status adoptfit_context_apply_env(adoptfit_context* ctx)
{
  if (!ctx)
    return ADOPTFIT_ERR_NULL_ARGUMENT;
  return guarded([&] { apply_environment(ctx->settings, [](const char* name) { return std::getenv(name); }); });
}

adoptfit_status adoptfit_context_use_fixture(adoptfit_context* ctx, const char* directory)
{
  if (!ctx || !directory)
    return ADOPTFIT_ERR_NULL_ARGUMENT;
  return guarded([&] {
    ctx->fixture = std::make_unique<FixtureRegistry>(directory);
    ctx->settings.registry.base_url = ctx->fixture->base_url();
  });
}

adoptfit_status adoptfit_ingest(adoptfit_context* ctx, const char* const* organizations, size_t n_organizations,
                                const char* const* bases, size_t n_bases, int include_early, adoptfit_buffer* out)
{
  return guarded([&] {
    auto orgs = strings(organizations, n_organizations);
    auto base_ids = strings(bases, n_bases);
    put(out, pipeline_of(ctx).ingest(orgs, base_ids, include_early != 0));
  });
}

adoptfit_status adoptfit_snapshot(adoptfit_context* ctx, const char* const* ids, size_t n_ids, const char* date,
                                  adoptfit_buffer* out)
{
  return guarded([&] {
    auto id_list = strings(ids, n_ids);
    std::optional<Date> d;
    if (date)
      d = parse_date(date);
    put(out, pipeline_of(ctx).snapshot(id_list, d));
  });
}

adoptfit_status adoptfit_build_series(adoptfit_context* ctx, const char* series_kind, double bucket_length_days,
                                      const char* as_of, int include_early, const char* const* extra_bases,
                                      size_t n_extra_bases, adoptfit_buffer* out)
{
  return guarded([&] {
    std::optional<Instant> through;
    if (as_of)
      through = parse_instant(as_of);
    auto extra = strings(extra_bases, n_extra_bases);
    put(out, pipeline_of(ctx).build_series(kind_arg(series_kind), bucket_length_days, through, include_early != 0,
                                           extra));
  });
}

adoptfit_status adoptfit_fit(adoptfit_context* ctx, const char* subject, const char* series_kind,
                             const adoptfit_fit_options* options, adoptfit_buffer* out)
{
  return guarded([&] {
    std::optional<std::string> s;
    if (subject)
      s = subject;
    put(out, pipeline_of(ctx).fit(s, kind_arg(series_kind), to_cpp(options)));
  });
}

adoptfit_status adoptfit_forecast(adoptfit_context* ctx, const char* subject, const char* series_kind,
                                  const double* targets, size_t n_targets, const double* horizons, size_t n_horizons,
                                  adoptfit_buffer* out)
{
  return guarded([&] {
    require(subject, "subject");
    if (n_targets > 0)
      require(targets, "targets");
    if (n_horizons > 0)
      require(horizons, "horizons");
    std::optional<SeriesKind> kind;
    if (series_kind && std::string_view(series_kind) != "auto")
      kind = parse_series_kind(series_kind);
    put(out, pipeline_of(ctx).forecast(subject, kind, std::span<const double>(targets, n_targets),
                                       std::span<const double>(horizons, n_horizons)));
  });
}

adoptfit_status adoptfit_analyze_pareto(adoptfit_context* ctx, const char* series_kind, double threshold,
                                        const char* format, adoptfit_buffer* out)
{
  return guarded(
      [&] { put(out, pipeline_of(ctx).analyze_pareto(kind_arg(series_kind), threshold, format_arg(format))); });
}

adoptfit_status adoptfit_analyze_params(adoptfit_context* ctx, const char* series_kind, const char* scale,
                                        size_t bin_count, int has_range, double range_low, double range_high,
                                        const char* format, adoptfit_buffer* out)
{
  return guarded([&] {
    HistogramSpec spec;
    spec.scale = scale ? parse_hist_scale(scale) : HistScale::log10;
    spec.bin_count = bin_count;
    if (has_range)
      spec.range = std::make_pair(range_low, range_high);
    put(out, pipeline_of(ctx).analyze_params(kind_arg(series_kind), spec, format_arg(format)));
  });
}

adoptfit_status adoptfit_analyze_pairwise(adoptfit_context* ctx, const char* series_kind, const char* format,
                                          adoptfit_buffer* out)
{
  return guarded([&] { put(out, pipeline_of(ctx).analyze_pairwise(kind_arg(series_kind), format_arg(format))); });
}

adoptfit_status adoptfit_analyze_org_density(adoptfit_context* ctx, const char* series_kind, const size_t* horizons,
                                             size_t n_horizons, double fitness_low, double fitness_high,
                                             size_t grid_size, const char* format, adoptfit_buffer* out)
{
  return guarded([&] {
    if (n_horizons > 0)
      require(horizons, "horizons");
    std::vector<std::size_t> h(horizons, horizons + n_horizons);
    put(out, pipeline_of(ctx).analyze_org_density(kind_arg(series_kind), h, fitness_low, fitness_high, grid_size,
                                                  format_arg(format)));
  });
}

} // extern "C"
