#pragma once

// Deterministic mean adoption curve
//
//   c(t) = m * (exp(lambda * Phi((ln t - mu) / sigma)) - 1)
//
// with t counted in buckets since release (t = 1 is the end of the first
// bucket). lambda is the relative fitness, mu the immediacy and sigma the
// longevity. Every function here is pure and safe to call concurrently.

namespace adoptfit {

struct FitParams
{
  double lambda = 1.0;
  double mu = 0.0;
  double sigma = 1.0;
  double m = 1.0;

  //! Throws Error(domain) unless lambda, sigma, m > 0 and all are finite.
  void validate() const;

  friend bool operator==(const FitParams&, const FitParams&) = default;
};

// Exponents lambda * Phi(z) are clamped here. exp(700) ~ 1e304 leaves headroom
// below DBL_MAX for the m scale and the gradient factors.
inline constexpr double kMaxExponent = 700.0;

struct CurveValue
{
  double value = 0.0;
  bool saturated = false;
};

struct Gradient
{
  double d_lambda = 0.0;
  double d_mu = 0.0;
  double d_sigma = 0.0;
  bool saturated = false;
};

double std_normal_pdf(double x);

//! Phi(x). Throws Error(domain) for non-finite x.
double std_normal_cdf(double x);

//! Inverse of Phi on (0, 1). Throws Error(domain) outside the open interval.
double std_normal_quantile(double p);

//! Standardized log-time (ln t - mu) / sigma.
double log_time_score(const FitParams& params, double t);

CurveValue evaluate(const FitParams& params, double t);

//! ln(1 + c(t)/m) = lambda * Phi(z); never overflows.
double log_evaluate(const FitParams& params, double t);

//! Asymptote m * (e^lambda - 1); saturated once lambda >= kMaxExponent.
CurveValue ceiling(const FitParams& params);

//! Time at which the curve reaches `target`.
//! Throws UnreachableTarget when target >= ceiling, Error(domain) when target <= 0.
double invert_time(const FitParams& params, double target);

//! Partials of c(t) with respect to (lambda, mu, sigma).
Gradient gradient(const FitParams& params, double t);

//! Partials of ln(1 + c(t)/m), i.e. gradient(params, t) / (m + c(t)), computed
//! without forming the exponential.
Gradient log_gradient(const FitParams& params, double t);

} // namespace adoptfit
