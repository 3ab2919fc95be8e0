#include "adoptfit/analytics.hpp"

#include "adoptfit/curve_model.hpp"
#include "adoptfit/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace adoptfit {

std::string format_number(double v)
{
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string_view to_string(HistScale scale)
{
  return scale == HistScale::log10 ? "log10" : "linear";
}

HistScale parse_hist_scale(std::string_view text)
{
  if (text == "log10")
    return HistScale::log10;
  if (text == "linear")
    return HistScale::linear;
  fail(ErrorKind::validation, "unknown histogram scale '" + std::string(text) + "'");
}

void HistogramSpec::validate() const
{
  if (bin_count < 1)
    fail(ErrorKind::validation, "bin_count must be at least 1");
  if (range && !(range->first < range->second))
    fail(ErrorKind::validation, "histogram range needs low < high");
}

namespace {

std::vector<const FitRecord*> converged_only(std::span<const FitRecord> fits)
{
  std::vector<const FitRecord*> out;
  for (const FitRecord& f : fits)
    if (f.result.status == FitStatus::converged)
      out.push_back(&f);
  return out;
}

Histogram bin_values(std::string name, const std::vector<double>& raw, const HistogramSpec& spec)
{
  Histogram h;
  h.parameter = std::move(name);
  h.scale = spec.scale;
  h.counts.assign(spec.bin_count, 0);

  std::vector<double> scaled;
  for (double v : raw) {
    if (spec.scale == HistScale::log10) {
      if (v > 0.0)
        scaled.push_back(std::log10(v));
      else
        ++h.underflow;
    } else {
      scaled.push_back(v);
    }
  }

  double lo, hi;
  if (spec.range) {
    lo = spec.range->first;
    hi = spec.range->second;
  } else if (!scaled.empty()) {
    auto [mn, mx] = std::minmax_element(scaled.begin(), scaled.end());
    lo = *mn;
    hi = *mx;
    if (!(lo < hi)) {
      lo -= 0.5;
      hi += 0.5;
    }
  } else {
    lo = 0.0;
    hi = 1.0;
  }

  double width = (hi - lo) / static_cast<double>(spec.bin_count);
  for (std::size_t i = 0; i <= spec.bin_count; ++i)
    h.edges.push_back(i == spec.bin_count ? hi : lo + width * static_cast<double>(i));

  for (double x : scaled) {
    if (x < lo) {
      ++h.underflow;
    } else if (x > hi) {
      ++h.overflow;
    } else {
      auto idx = static_cast<std::size_t>(std::floor((x - lo) / (hi - lo) * static_cast<double>(spec.bin_count)));
      h.counts[std::min(idx, spec.bin_count - 1)]++;
    }
  }
  return h;
}

} // namespace

ParameterHistograms parameter_histograms(std::span<const FitRecord> fits, const HistogramSpec& spec)
{
  spec.validate();
  std::vector<const FitRecord*> ok = converged_only(fits);
  if (ok.empty())
    fail(ErrorKind::validation, "no converged fits to histogram");

  std::vector<double> lambdas, mus, sigmas;
  for (const FitRecord* f : ok) {
    lambdas.push_back(f->result.params.lambda);
    mus.push_back(f->result.params.mu);
    sigmas.push_back(f->result.params.sigma);
  }
  ParameterHistograms out;
  out.lambda = bin_values("lambda", lambdas, spec);
  out.mu = bin_values("mu", mus, spec);
  out.sigma = bin_values("sigma", sigmas, spec);
  out.excluded = fits.size() - ok.size();
  return out;
}

PairwisePanels pairwise_points(std::span<const FitRecord> fits)
{
  std::vector<const FitRecord*> ok = converged_only(fits);
  if (ok.empty())
    fail(ErrorKind::validation, "no converged fits for pairwise panels");
  PairwisePanels out;
  for (const FitRecord* f : ok) {
    const FitParams& p = f->result.params;
    out.lambda_mu.push_back({f->subject_id, p.lambda, p.mu});
    out.lambda_sigma.push_back({f->subject_id, p.lambda, p.sigma});
    out.sigma_mu.push_back({f->subject_id, p.sigma, p.mu});
  }
  return out;
}

ParetoResult pareto_concentration(std::span<const double> values, double mass_threshold)
{
  if (!(mass_threshold > 0.0 && mass_threshold <= 1.0))
    fail(ErrorKind::domain, "mass_threshold must lie in (0, 1]");
  long double total = 0.0L;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v))
      fail(ErrorKind::domain, "pareto_concentration needs finite nonnegative values");
    total += v;
  }
  if (!(total > 0.0L))
    fail(ErrorKind::domain, "pareto_concentration needs at least one positive value");

  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

  // Shares are compared after rounding to double: 80 of 100 meets 0.8.
  long double running = 0.0L;
  std::size_t count = 0;
  for (std::size_t idx : order) {
    running += values[idx];
    ++count;
    if (static_cast<double>(running) / static_cast<double>(total) >= mass_threshold)
      break;
  }
  ParetoResult r;
  r.item_count = count;
  r.total_items = values.size();
  r.item_fraction = static_cast<double>(count) / static_cast<double>(values.size());
  return r;
}

double trapezoid_integral(std::span<const double> x, std::span<const double> y)
{
  double sum = 0.0;
  for (std::size_t i = 1; i < x.size() && i < y.size(); ++i)
    sum += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return sum;
}

namespace {

// Linear-interpolation quantile on sorted data (the usual "type 7").
double sorted_quantile(const std::vector<double>& sorted, double q)
{
  double pos = q * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

} // namespace

double silverman_bandwidth(std::span<const double> values)
{
  if (values.empty())
    fail(ErrorKind::validation, "bandwidth needs at least one value");
  double n = static_cast<double>(values.size());
  double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values)
    ss += (v - mean) * (v - mean);
  double sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);

  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0))
    spread = sd;
  double h = 0.9 * spread * std::pow(n, -0.2);
  if (!(h > 0.0))
    h = 1e-3 * std::max(1.0, std::abs(mean));
  return h;
}

DensityCurve gaussian_kde(std::span<const double> values, std::size_t grid_size)
{
  if (grid_size < 2)
    fail(ErrorKind::validation, "grid_size must be at least 2");
  DensityCurve curve;
  curve.bandwidth = silverman_bandwidth(values);
  curve.n_subjects = values.size();
  auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  double lo = *mn - 3.0 * curve.bandwidth;
  double hi = *mx + 3.0 * curve.bandwidth;
  double step = (hi - lo) / static_cast<double>(grid_size - 1);

  const double h = curve.bandwidth;
  const double norm = 1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * 3.14159265358979323846));
  curve.grid.resize(grid_size);
  curve.density.resize(grid_size);
  for (std::size_t i = 0; i < grid_size; ++i) {
    double x = i + 1 == grid_size ? hi : lo + step * static_cast<double>(i);
    double sum = 0.0;
    for (double v : values) {
      double u = (x - v) / h;
      sum += std::exp(-0.5 * u * u);
    }
    curve.grid[i] = x;
    curve.density[i] = norm * sum;
  }
  double mass = trapezoid_integral(curve.grid, curve.density);
  for (double& d : curve.density)
    d /= mass;
  return curve;
}

OrgDensityReport org_density(std::span<const DensitySubject> subjects, const OrgDensityOptions& options)
{
  if (options.horizon_buckets < 1)
    fail(ErrorKind::validation, "horizon_buckets must be positive");
  if (!(options.fitness_low <= options.fitness_high))
    fail(ErrorKind::validation, "fitness range needs low <= high");

  OrgDensityReport report;
  report.horizon_buckets = options.horizon_buckets;
  std::map<std::string, std::vector<double>> by_org;
  for (const DensitySubject& s : subjects) {
    by_org.try_emplace(s.organization);
    const char* reason = nullptr;
    if (s.fit.status != FitStatus::converged)
      reason = "not_converged";
    else if (s.fit.params.lambda < options.fitness_low || s.fit.params.lambda > options.fitness_high)
      reason = "fitness_out_of_range";
    else if (s.cumulative.size() < options.horizon_buckets)
      reason = "series_too_short";
    if (reason) {
      report.excluded_subjects.push_back({s.subject_id, s.organization, reason});
      continue;
    }
    by_org[s.organization].push_back(s.cumulative[options.horizon_buckets - 1]);
  }

  for (auto& [org, values] : by_org) {
    if (values.size() < 2) {
      report.excluded_organizations.push_back({org, values.size()});
      continue;
    }
    DensityCurve curve = gaussian_kde(values, options.grid_size);
    curve.organization = org;
    curve.horizon_buckets = options.horizon_buckets;
    report.curves.push_back(std::move(curve));
  }
  return report;
}

ForecastReport forecast_report(const FitResult& fit, std::span<const double> targets,
                               std::span<const double> horizons)
{
  if (fit.status != FitStatus::converged)
    fail(ErrorKind::refused, "cannot forecast from a fit with status " + std::string(to_string(fit.status)));

  ForecastReport report;
  CurveValue top = ceiling(fit.params);
  for (double target : targets) {
    TargetForecast row;
    row.target = target;
    row.ceiling = top.value;
    row.ceiling_saturated = top.saturated;
    try {
      row.time_buckets = invert_time(fit.params, target);
    } catch (const UnreachableTarget&) {
      row.time_buckets.reset();
    }
    report.targets.push_back(row);
  }
  for (double t : horizons) {
    CurveValue v = evaluate(fit.params, t);
    report.horizons.push_back({t, v.value, v.saturated});
  }
  return report;
}

std::string histograms_csv(const ParameterHistograms& h)
{
  std::ostringstream os;
  os << "parameter,scale,bin,low,high,count\n";
  for (const Histogram* hist : {&h.lambda, &h.mu, &h.sigma}) {
    std::string scale(to_string(hist->scale));
    for (std::size_t i = 0; i < hist->counts.size(); ++i)
      os << hist->parameter << ',' << scale << ',' << i << ',' << format_number(hist->edges[i]) << ','
         << format_number(hist->edges[i + 1]) << ',' << hist->counts[i] << '\n';
    os << hist->parameter << ',' << scale << ",underflow,,," << hist->underflow << '\n';
    os << hist->parameter << ',' << scale << ",overflow,,," << hist->overflow << '\n';
  }
  os << "all,,excluded,,," << h.excluded << '\n';
  return os.str();
}

std::string pairwise_csv(const PairwisePanels& panels)
{
  std::ostringstream os;
  os << "panel,subject_id,x,y\n";
  auto emit = [&](const char* name, const std::vector<PairPoint>& pts) {
    for (const PairPoint& p : pts)
      os << name << ',' << p.subject_id << ',' << format_number(p.x) << ',' << format_number(p.y) << '\n';
  };
  emit("lambda_mu", panels.lambda_mu);
  emit("lambda_sigma", panels.lambda_sigma);
  emit("sigma_mu", panels.sigma_mu);
  return os.str();
}

std::string pareto_csv(const ParetoResult& r, double threshold)
{
  std::ostringstream os;
  os << "item_count,total_items,item_fraction,mass_threshold\n";
  os << r.item_count << ',' << r.total_items << ',' << format_number(r.item_fraction) << ','
     << format_number(threshold) << '\n';
  return os.str();
}

std::string org_density_csv(std::span<const OrgDensityReport> reports)
{
  std::ostringstream os;
  os << "record,horizon_buckets,organization,subject_id,reason,n_subjects,bandwidth,c,density\n";
  for (const OrgDensityReport& r : reports) {
    for (const DensityCurve& c : r.curves)
      for (std::size_t i = 0; i < c.grid.size(); ++i)
        os << "density," << c.horizon_buckets << ',' << c.organization << ",,," << c.n_subjects << ','
           << format_number(c.bandwidth) << ',' << format_number(c.grid[i]) << ',' << format_number(c.density[i])
           << '\n';
  }
  for (const OrgDensityReport& r : reports) {
    for (const OrgExclusion& e : r.excluded_organizations)
      os << "excluded_organization," << r.horizon_buckets << ',' << e.organization << ",,fewer_than_2_subjects,"
         << e.qualifying_subjects << ",,,\n";
    for (const SubjectExclusion& e : r.excluded_subjects)
      os << "excluded_subject," << r.horizon_buckets << ',' << e.organization << ',' << e.subject_id << ','
         << e.reason << ",,,,\n";
  }
  return os.str();
}

std::string forecast_csv(const ForecastReport& r, double bucket_length_days)
{
  std::ostringstream os;
  os << "direction,time_buckets,days_since_release,count,note\n";
  for (const TargetForecast& t : r.targets) {
    if (t.time_buckets) {
      os << "target_to_time," << format_number(*t.time_buckets) << ','
         << format_number(*t.time_buckets * bucket_length_days) << ',' << format_number(t.target) << ",\n";
    } else {
      os << "target_to_time,,," << format_number(t.target) << ",unreachable (ceiling="
         << format_number(t.ceiling) << (t.ceiling_saturated ? " saturated" : "") << ")\n";
    }
  }
  for (const HorizonForecast& h : r.horizons)
    os << "time_to_count," << format_number(h.time_buckets) << ','
       << format_number(h.time_buckets * bucket_length_days) << ',' << format_number(h.value) << ','
       << (h.saturated ? "saturated" : "") << '\n';
  return os.str();
}

} // namespace adoptfit
