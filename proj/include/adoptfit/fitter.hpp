#pragma once

#include "adoptfit/curve_model.hpp"
#include "adoptfit/time.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace adoptfit {

//! Cumulative adoption counts per bucket since a base model's release.
//! Bucket k is observed at time t_k = observation_offset_buckets + k + 1.
struct AdoptionSeries
{
  std::string subject_id;
  Instant release_instant{};
  double bucket_length_days = 30.0;
  std::vector<double> cumulative;
  double observation_offset_buckets = 0.0;

  //! Throws Error(validation) for an empty, negative, non-finite or
  //! decreasing series, or for bad bucket/offset values.
  void validate() const;

  std::size_t size() const { return cumulative.size(); }
  double time_at(std::size_t k) const
  {
    return observation_offset_buckets + static_cast<double>(k) + 1.0;
  }

  friend bool operator==(const AdoptionSeries&, const AdoptionSeries&) = default;
};

enum class FitStatus
{
  converged,
  failed_sentinel,
  bound_degenerate
};

std::string_view to_string(FitStatus status);
FitStatus parse_fit_status(std::string_view text);

struct ParamBox
{
  double low;
  double high;

  bool near_edge(double value, double rel_tol) const;
};

struct FitBounds
{
  ParamBox lambda{1e-6, 1e8};
  ParamBox mu{-10.0, 200.0};
  ParamBox sigma{1e-3, 1e9};
};

struct FitOptions
{
  FitBounds bounds;
  int max_iterations = 500;
  int n_restarts = 8;
  double convergence_tol = 1e-10;
  std::uint64_t rng_seed = 0;
  double m = 1.0;

  void validate() const;
};

struct FitResult
{
  FitParams params;
  FitStatus status = FitStatus::failed_sentinel;
  double rmse_log = 0.0;
  std::size_t n_points = 0;
  int n_restarts_used = 0;

  friend bool operator==(const FitResult&, const FitResult&) = default;
};

//! Parameters recorded for fits that fail to describe the data.
inline constexpr FitParams kSentinelParams{0.5, 2.0, 0.5, 1.0};

//! Relative distance from a bound below which a parameter counts as pinned.
inline constexpr double kBoundRelTol = 1e-6;

//! ln(1 + observed_k / m) - lambda * Phi(z_k) for every bucket.
std::vector<double> residuals(const FitParams& params, const AdoptionSeries& series);

//! Root-mean-square of residuals().
double rmse_log(const FitParams& params, const AdoptionSeries& series);

//! lambda0 = ln(1 + last), mu0 = ln(median t), sigma0 = 1.
FitParams default_initialization(const AdoptionSeries& series);

//! Starting points for every restart: the default initialization followed by
//! seeded log-uniform perturbations in [1/4, 4], clamped into the bounds.
std::vector<FitParams> restart_points(const AdoptionSeries& series, const FitOptions& options);

//! True when the fitted curve's rise (1%..99% of lambda) falls strictly
//! between two consecutive observations, so no point constrains its shape.
bool transition_unresolved(const FitParams& params, const AdoptionSeries& series);

//! Damped least squares on ln(1 + c) with multistart. Throws
//! Error(insufficient_data) for fewer than 4 points or an all-zero series;
//! optimizer failure is reported through FitResult::status.
FitResult fit_series(const AdoptionSeries& series, const FitOptions& options = {});

} // namespace adoptfit
