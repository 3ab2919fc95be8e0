#include "adoptfit/curve_model.hpp"

#include "adoptfit/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace adoptfit {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kSqrt2Pi = 2.50662827463100050242;

void require_time(double t)
{
  if (!(t > 0.0) || !std::isfinite(t))
    fail(ErrorKind::domain, "time must be positive and finite, got " + std::to_string(t));
}

// Acklam's rational approximation for the lower half (p <= 0.5), relative
// error ~1e-9, followed by one Halley step against Phi.
double lower_quantile(double p)
{
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }

  double e = 0.5 * std::erfc(-x * kInvSqrt2) - p;
  double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double scaled_expm1(double m, double exponent, bool& saturated)
{
  saturated = exponent >= kMaxExponent;
  double value = m * std::expm1(saturated ? kMaxExponent : exponent);
  if (!std::isfinite(value)) {
    saturated = true;
    value = std::numeric_limits<double>::max();
  }
  return value;
}

//! a * b, clamped to the largest finite magnitude.
double clamped_product(double a, double b)
{
  if (a == 0.0 || b == 0.0)
    return 0.0;
  double r = a * b;
  return std::isfinite(r) ? r : std::copysign(std::numeric_limits<double>::max(), r);
}

} // namespace

void FitParams::validate() const
{
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    fail(ErrorKind::domain, "lambda must be positive and finite");
  if (!std::isfinite(mu))
    fail(ErrorKind::domain, "mu must be finite");
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    fail(ErrorKind::domain, "sigma must be positive and finite");
  if (!(m > 0.0) || !std::isfinite(m))
    fail(ErrorKind::domain, "m must be positive and finite");
}

double std_normal_pdf(double x)
{
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double std_normal_cdf(double x)
{
  if (!std::isfinite(x))
    fail(ErrorKind::domain, "std_normal_cdf needs a finite argument");
  return 0.5 * std::erfc(-x * kInvSqrt2);
}

double std_normal_quantile(double p)
{
  if (!(p > 0.0 && p < 1.0))
    fail(ErrorKind::domain, "quantile probability must lie in (0, 1), got " + std::to_string(p));
  if (p <= 0.5)
    return lower_quantile(p);
  // 1 - p is exact for p >= 0.5
  return -lower_quantile(1.0 - p);
}

double log_time_score(const FitParams& params, double t)
{
  require_time(t);
  return (std::log(t) - params.mu) / params.sigma;
}

double log_evaluate(const FitParams& params, double t)
{
  params.validate();
  return params.lambda * std_normal_cdf(log_time_score(params, t));
}

CurveValue evaluate(const FitParams& params, double t)
{
  double exponent = log_evaluate(params, t);
  CurveValue out;
  out.value = scaled_expm1(params.m, exponent, out.saturated);
  return out;
}

CurveValue ceiling(const FitParams& params)
{
  params.validate();
  CurveValue out;
  out.value = scaled_expm1(params.m, params.lambda, out.saturated);
  return out;
}

double invert_time(const FitParams& params, double target)
{
  params.validate();
  if (!(target > 0.0) || !std::isfinite(target))
    fail(ErrorKind::domain, "target count must be positive and finite");

  CurveValue top = ceiling(params);
  if (!top.saturated && target >= top.value)
    throw UnreachableTarget(target, top.value);

  double p = std::log1p(target / params.m) / params.lambda;
  double z = 0.0;
  if (p > 0.5 && !top.saturated) {
    // Upper tail 1 - Phi(z) from the gap to the ceiling, exact near the asymptote.
    double gap = (top.value - target) / (params.m + top.value);
    double q = -std::log1p(-gap) / params.lambda;
    if (!(q > 0.0))
      throw UnreachableTarget(target, top.value);
    z = -std_normal_quantile(q);
  } else {
    if (!(p < 1.0))
      throw UnreachableTarget(target, top.value);
    z = std_normal_quantile(p);
  }

  double t = std::exp(params.mu + params.sigma * z);
  if (!std::isfinite(t))
    throw UnreachableTarget(target, top.value);
  return t;
}

Gradient gradient(const FitParams& params, double t)
{
  params.validate();
  double z = log_time_score(params, t);
  double cdf = std_normal_cdf(z);
  double pdf = std_normal_pdf(z);

  Gradient g;
  double exponent = params.lambda * cdf;
  g.saturated = exponent >= kMaxExponent;
  double scale = clamped_product(params.m, std::exp(g.saturated ? kMaxExponent : exponent));
  g.d_lambda = clamped_product(scale, cdf);
  g.d_mu = -clamped_product(scale, params.lambda * pdf / params.sigma);
  g.d_sigma = clamped_product(g.d_mu, z);
  return g;
}

Gradient log_gradient(const FitParams& params, double t)
{
  params.validate();
  double z = log_time_score(params, t);
  double pdf = std_normal_pdf(z);

  Gradient g;
  g.d_lambda = std_normal_cdf(z);
  g.d_mu = -params.lambda * pdf / params.sigma;
  g.d_sigma = g.d_mu * z;
  return g;
}

} // namespace adoptfit
