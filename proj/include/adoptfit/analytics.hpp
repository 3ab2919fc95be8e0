#pragma once

#include "adoptfit/records.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace adoptfit {

// ---------------------------------------------------------------------------
// Parameter distributions

enum class HistScale
{
  log10,
  linear
};

std::string_view to_string(HistScale scale);
HistScale parse_hist_scale(std::string_view text);

struct HistogramSpec
{
  HistScale scale = HistScale::log10;
  std::size_t bin_count = 20;
  std::optional<std::pair<double, double>> range; // on the chosen scale

  void validate() const;
};

struct Histogram
{
  std::string parameter;
  HistScale scale = HistScale::log10;
  std::vector<double> edges; // bin_count + 1 edges on the chosen scale
  std::vector<std::size_t> counts;
  std::size_t underflow = 0; // below range, or nonpositive on a log scale
  std::size_t overflow = 0;
};

struct ParameterHistograms
{
  Histogram lambda;
  Histogram mu;
  Histogram sigma;
  std::size_t excluded = 0; // fits that are not converged
};

//! Histograms of lambda, mu and sigma over converged fits. Without an explicit
//! range each histogram spans its own min..max. Throws Error(validation) when
//! no fit converged.
ParameterHistograms parameter_histograms(std::span<const FitRecord> fits, const HistogramSpec& spec);

struct PairPoint
{
  std::string subject_id;
  double x = 0.0;
  double y = 0.0;
};

struct PairwisePanels
{
  std::vector<PairPoint> lambda_mu;
  std::vector<PairPoint> lambda_sigma;
  std::vector<PairPoint> sigma_mu;
};

//! One point per converged fit in each panel.
PairwisePanels pairwise_points(std::span<const FitRecord> fits);

// ---------------------------------------------------------------------------
// Concentration

struct ParetoResult
{
  double item_fraction = 0.0;
  std::size_t item_count = 0;
  std::size_t total_items = 0;
};

//! Smallest set of largest items whose values reach mass_threshold of the total.
//! Equal values keep their input order. Throws Error(domain) for negative or
//! all-zero input or a threshold outside (0, 1].
ParetoResult pareto_concentration(std::span<const double> values, double mass_threshold = 0.8);

// ---------------------------------------------------------------------------
// Organization density at a horizon

struct DensitySubject
{
  std::string subject_id;
  std::string organization;
  FitResult fit;
  std::vector<double> cumulative;
};

struct OrgDensityOptions
{
  std::size_t horizon_buckets = 12;
  double fitness_low = 1.0;
  double fitness_high = 10.0;
  std::size_t grid_size = 512;
};

struct DensityCurve
{
  std::string organization;
  std::size_t horizon_buckets = 0;
  std::size_t n_subjects = 0;
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> density;
};

struct SubjectExclusion
{
  std::string subject_id;
  std::string organization;
  std::string reason; // not_converged | fitness_out_of_range | series_too_short
};

struct OrgExclusion
{
  std::string organization;
  std::size_t qualifying_subjects = 0;
};

struct OrgDensityReport
{
  std::size_t horizon_buckets = 0;
  std::vector<DensityCurve> curves;
  std::vector<SubjectExclusion> excluded_subjects;
  std::vector<OrgExclusion> excluded_organizations;
};

//! 0.9 * min(sd, IQR / 1.34) * n^(-1/5); falls back to sd when the IQR is
//! zero and to 1e-3 * max(1, |mean|) when there is no spread at all.
double silverman_bandwidth(std::span<const double> values);

//! Gaussian KDE on `grid_size` points from min - 3h to max + 3h, normalized so
//! the trapezoid integral over the grid is 1.
DensityCurve gaussian_kde(std::span<const double> values, std::size_t grid_size);

double trapezoid_integral(std::span<const double> x, std::span<const double> y);

//! Per-organization KDE of the observed cumulative count at the horizon, over
//! subjects with a converged fit whose lambda lies in the fitness range and
//! whose series reaches the horizon. Organizations with fewer than 2 such
//! subjects are listed as excluded.
OrgDensityReport org_density(std::span<const DensitySubject> subjects, const OrgDensityOptions& options);

// ---------------------------------------------------------------------------
// Forecasts

struct TargetForecast
{
  double target = 0.0;
  std::optional<double> time_buckets; // empty when unreachable
  double ceiling = 0.0;
  bool ceiling_saturated = false;
};

struct HorizonForecast
{
  double time_buckets = 0.0;
  double value = 0.0;
  bool saturated = false;
};

struct ForecastReport
{
  std::vector<TargetForecast> targets;
  std::vector<HorizonForecast> horizons;
};

//! Throws Error(refused) unless the fit converged.
ForecastReport forecast_report(const FitResult& fit, std::span<const double> targets,
                               std::span<const double> horizons);

// ---------------------------------------------------------------------------
// CSV output

std::string histograms_csv(const ParameterHistograms& h);
std::string pairwise_csv(const PairwisePanels& panels);
std::string pareto_csv(const ParetoResult& r, double threshold);
std::string org_density_csv(std::span<const OrgDensityReport> reports);
std::string forecast_csv(const ForecastReport& r, double bucket_length_days);

//! Shortest round-trip decimal form of a double.
std::string format_number(double v);

} // namespace adoptfit
