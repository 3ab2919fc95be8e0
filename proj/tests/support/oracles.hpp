#pragma once
//! Reference computations that share no code with the library.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

//! Standard normal CDF by composite Gauss-Legendre quadrature of the density,
//! in long double. The lower tail is integrated directly, so small values keep
//! their relative accuracy.
long double normal_cdf(long double x);

//! Bisection root of normal_cdf(x) = p.
long double normal_quantile(long double p);

//! m * (exp(lambda * Phi((ln t - mu) / sigma)) - 1) in quad precision.
__float128 curve_q(__float128 lambda, __float128 mu, __float128 sigma, __float128 m, __float128 t);

//! Central finite difference of curve_q with respect to parameter `which`
//! (0 = lambda, 1 = mu, 2 = sigma), relative step 1e-6.
double curve_partial_fd(double lambda, double mu, double sigma, double m, double t, int which);

double to_double(__float128 v);
std::string to_string(__float128 v);

//! Item count of the smallest top-valued prefix whose exact integer sum reaches
//! `threshold` of the total. Items are ranked through a counting map.
std::size_t pareto_count(const std::vector<std::uint64_t>& values, double threshold);

//! Cumulative fine-tune counts per bucket by direct counting of ages in days.
std::vector<double> bucket_counts(const std::vector<double>& ages_days, double bucket_days, std::size_t n_buckets);

} // namespace oracle
