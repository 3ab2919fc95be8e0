#include "adoptfit/analytics.hpp"
#include "adoptfit/error.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

using namespace adoptfit;

namespace {

FitRecord fit_with(std::string id, double lambda, double mu = 1, double sigma = 1,
                   FitStatus status = FitStatus::converged)
{
  FitRecord f;
  f.subject_id = std::move(id);
  f.result.params = {lambda, mu, sigma, 1};
  f.result.status = status;
  if (status == FitStatus::failed_sentinel)
    f.result.params = kSentinelParams;
  return f;
}

std::vector<std::uint64_t> zipf_sample(std::mt19937_64& rng, std::size_t n, double s)
{
  // Inverse CDF over ranks 1..K with weights k^-s, scaled to integer counts.
  const std::size_t K = 5000;
  std::vector<double> cdf(K);
  double acc = 0;
  for (std::size_t k = 0; k < K; ++k) {
    acc += std::pow(static_cast<double>(k + 1), -s);
    cdf[k] = acc;
  }
  std::uniform_real_distribution<double> u(0, acc);
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t rank = std::lower_bound(cdf.begin(), cdf.end(), u(rng)) - cdf.begin() + 1;
    out.push_back(static_cast<std::uint64_t>(1e6 / std::pow(static_cast<double>(rank), s)));
  }
  return out;
}

//! Linear-interpolation sample quantile.
double quantile7(std::vector<double> v, double q)
{
  std::sort(v.begin(), v.end());
  double h = (v.size() - 1) * q;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - lo) * (v[hi] - v[lo]);
}

} // namespace

TEST_CASE("histogram examples")
{
  HistogramSpec spec;
  spec.scale = HistScale::log10;
  spec.bin_count = 4;
  spec.range = std::pair{0.0, 2.0};

  std::vector<FitRecord> tens{fit_with("a/1", 10), fit_with("a/2", 10), fit_with("a/3", 10)};
  ParameterHistograms h = parameter_histograms(tens, spec);
  CHECK(h.lambda.counts == std::vector<std::size_t>{0, 0, 3, 0});
  CHECK(h.lambda.edges.size() == 5);

  spec.bin_count = 3;
  std::vector<FitRecord> decades{fit_with("a/1", 1), fit_with("a/2", 10), fit_with("a/3", 100)};
  CHECK(parameter_histograms(decades, spec).lambda.counts == std::vector<std::size_t>{1, 1, 1});

  std::vector<FitRecord> huge{fit_with("a/1", 1e7)};
  ParameterHistograms o = parameter_histograms(huge, spec);
  CHECK(o.lambda.overflow == 1);
  CHECK(std::accumulate(o.lambda.counts.begin(), o.lambda.counts.end(), std::size_t{0}) == 0);
}

TEST_CASE("histogram conservation and exclusions")
{
  std::mt19937_64 rng(8);
  std::lognormal_distribution<double> ln(1.0, 2.0);
  std::normal_distribution<double> nrm(1.0, 3.0);
  std::vector<FitRecord> fits;
  for (int i = 0; i < 200; ++i)
    fits.push_back(fit_with("o/m" + std::to_string(i), ln(rng), nrm(rng), ln(rng),
                            i % 10 == 0 ? FitStatus::failed_sentinel : FitStatus::converged));
  HistogramSpec spec;
  spec.range = std::pair{-1.0, 2.0};
  ParameterHistograms h = parameter_histograms(fits, spec);
  CHECK(h.excluded == 20);
  for (const Histogram* hist : {&h.lambda, &h.mu, &h.sigma}) {
    std::size_t sum = std::accumulate(hist->counts.begin(), hist->counts.end(), std::size_t{0});
    CHECK(sum + hist->underflow + hist->overflow == 180);
  }
  // mu can be negative: on a log scale those land in underflow
  std::size_t nonpositive_mu = std::count_if(fits.begin(), fits.end(), [](const FitRecord& f) {
    return f.result.status == FitStatus::converged && f.result.params.mu <= 0;
  });
  CHECK(h.mu.underflow >= nonpositive_mu);

  HistogramSpec auto_range;
  auto_range.scale = HistScale::linear;
  ParameterHistograms a = parameter_histograms(fits, auto_range);
  CHECK(a.lambda.underflow == 0);
  CHECK(a.lambda.overflow == 0);

  std::vector<FitRecord> none{fit_with("a/b", 1, 1, 1, FitStatus::bound_degenerate)};
  CHECK_THROWS_AS(parameter_histograms(none, spec), Error);
  HistogramSpec bad;
  bad.bin_count = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.range = std::pair{2.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("pairwise points project converged fits")
{
  std::vector<FitRecord> fits{fit_with("a/1", 2, 3, 4), fit_with("a/2", 5, 6, 7),
                              fit_with("a/3", 1, 1, 1, FitStatus::failed_sentinel)};
  PairwisePanels p = pairwise_points(fits);
  REQUIRE(p.lambda_mu.size() == 2);
  REQUIRE(p.lambda_sigma.size() == 2);
  REQUIRE(p.sigma_mu.size() == 2);
  CHECK(p.lambda_mu[0].subject_id == "a/1");
  CHECK(p.lambda_mu[0].x == 2);
  CHECK(p.lambda_mu[0].y == 3);
  CHECK(p.lambda_sigma[1].x == 5);
  CHECK(p.lambda_sigma[1].y == 7);
  CHECK(p.sigma_mu[1].x == 7);
  CHECK(p.sigma_mu[1].y == 6);
}

TEST_CASE("pareto examples")
{
  std::vector<double> skewed{80, 10, 5, 3, 2};
  ParetoResult r = pareto_concentration(skewed, 0.8);
  CHECK(r.item_count == 1);
  CHECK(r.item_fraction == 0.2);
  CHECK(r.total_items == 5);

  std::vector<double> uniform{1, 1, 1, 1, 1};
  ParetoResult u = pareto_concentration(uniform, 0.8);
  CHECK(u.item_count == 4);
  CHECK(u.item_fraction == 0.8);

  std::vector<double> shuffled{2, 80, 3, 10, 5};
  CHECK(pareto_concentration(shuffled, 0.9).item_count == 2);
  CHECK(pareto_concentration(shuffled, 1.0).item_count == 5);

  std::vector<double> zeros{0, 0};
  CHECK_THROWS_AS(pareto_concentration(zeros), Error);
  std::vector<double> negative{1, -1};
  CHECK_THROWS_AS(pareto_concentration(negative), Error);
  CHECK_THROWS_AS(pareto_concentration(skewed, 0.0), Error);
  CHECK_THROWS_AS(pareto_concentration(skewed, 1.5), Error);
}

TEST_CASE("pareto matches the brute-force oracle on Zipf samples")
{
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 10; ++trial) {
    auto sample = zipf_sample(rng, 10000, 1.2);
    std::vector<double> values(sample.begin(), sample.end());
    for (double threshold : {0.5, 0.8, 0.95}) {
      ParetoResult r = pareto_concentration(values, threshold);
      CHECK(r.item_count == oracle::pareto_count(sample, threshold));
      CHECK(r.item_fraction == static_cast<double>(r.item_count) / 10000.0);
    }
    for (double scale : {2.0, 0.25, 1024.0}) {
      std::vector<double> scaled = values;
      for (double& v : scaled)
        v *= scale;
      CHECK(pareto_concentration(scaled).item_count == pareto_concentration(values).item_count);
    }
  }
}

TEST_CASE("silverman bandwidth")
{
  std::vector<double> v{1, 2, 3, 4, 10};
  double sd = std::sqrt((9 + 4 + 1 + 0 + 36) / 4.0);
  double iqr = quantile7(v, 0.75) - quantile7(v, 0.25);
  CHECK(silverman_bandwidth(v) == doctest::Approx(0.9 * std::min(sd, iqr / 1.34) * std::pow(5.0, -0.2)));

  std::vector<double> same{10, 10, 10};
  CHECK(silverman_bandwidth(same) == doctest::Approx(1e-2));
  std::vector<double> small{0.5, 0.5};
  CHECK(silverman_bandwidth(small) == doctest::Approx(1e-3));
  std::vector<double> outer{0, 0, 0, 0, 10};
  double sd2 = std::sqrt((4 * 4 + 64) / 4.0);
  CHECK(silverman_bandwidth(outer) == doctest::Approx(0.9 * sd2 * std::pow(5.0, -0.2)));
}

TEST_CASE("kde normalization, peak and symmetry")
{
  std::vector<double> same{10, 10, 10};
  DensityCurve c = gaussian_kde(same, 512);
  CHECK(trapezoid_integral(c.grid, c.density) == doctest::Approx(1.0).epsilon(1e-6));
  auto peak = std::max_element(c.density.begin(), c.density.end()) - c.density.begin();
  CHECK(std::fabs(c.grid[peak] - 10) <= (c.grid[1] - c.grid[0]));

  std::vector<double> two{0, 100};
  DensityCurve b = gaussian_kde(two, 513);
  CHECK(b.grid.front() + b.grid.back() == doctest::Approx(100.0));
  for (std::size_t i = 0; i < b.grid.size(); ++i)
    CHECK(b.density[i] == doctest::Approx(b.density[b.grid.size() - 1 - i]).epsilon(1e-9));
  auto nearest = [&](double x) {
    return std::min_element(b.grid.begin(), b.grid.end(),
                            [&](double a, double c) { return std::fabs(a - x) < std::fabs(c - x); }) -
           b.grid.begin();
  };
  CHECK(b.density[nearest(50)] < b.density[nearest(0)]);

  std::mt19937_64 rng(4);
  std::lognormal_distribution<double> ln(3, 1);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> vals;
    for (int k = 0; k < 2 + i; ++k)
      vals.push_back(std::round(ln(rng)));
    DensityCurve d = gaussian_kde(vals, 512);
    CHECK(std::fabs(trapezoid_integral(d.grid, d.density) - 1.0) <= 1e-6);
    CHECK(std::is_sorted(d.grid.begin(), d.grid.end()));
    CHECK(std::adjacent_find(d.grid.begin(), d.grid.end()) == d.grid.end());
    CHECK(std::all_of(d.density.begin(), d.density.end(), [](double x) { return x >= 0; }));
  }
}

TEST_CASE("org density exclusions match brute-force re-filtering")
{
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> lam(0.2, 14);
  std::uniform_int_distribution<int> len(3, 20), status(0, 9);
  const char* orgs[] = {"alpha", "beta", "gamma", "delta", "eps"};
  std::vector<DensitySubject> subjects;
  for (int i = 0; i < 40; ++i) {
    DensitySubject s;
    s.organization = orgs[i % 5];
    s.subject_id = s.organization + "/m" + std::to_string(i);
    s.fit.status = status(rng) == 0 ? FitStatus::bound_degenerate : FitStatus::converged;
    s.fit.params = {lam(rng), 1, 1, 1};
    int n = len(rng);
    for (int k = 0; k < n; ++k)
      s.cumulative.push_back(k * (i + 1));
    subjects.push_back(s);
  }
  // one org that can never qualify
  subjects.push_back({"zeta/only", "zeta", FitResult{{5, 1, 1, 1}, FitStatus::converged, 0, 20, 1},
                      std::vector<double>(20, 3.0)});

  for (std::size_t horizon : {2, 6, 12}) {
    OrgDensityOptions opt;
    opt.horizon_buckets = horizon;
    OrgDensityReport rep = org_density(subjects, opt);

    std::set<std::string> expected_excluded;
    std::map<std::string, std::vector<double>> kept;
    for (const DensitySubject& s : subjects) {
      bool ok = s.fit.status == FitStatus::converged && s.fit.params.lambda >= 1 && s.fit.params.lambda <= 10 &&
                s.cumulative.size() >= horizon;
      kept[s.organization];
      if (ok)
        kept[s.organization].push_back(s.cumulative[horizon - 1]);
      else
        expected_excluded.insert(s.subject_id);
    }
    std::set<std::string> got_excluded;
    for (const SubjectExclusion& e : rep.excluded_subjects)
      got_excluded.insert(e.subject_id);
    CHECK(got_excluded == expected_excluded);

    std::set<std::string> expected_orgs, got_orgs;
    for (const auto& [org, vals] : kept)
      if (vals.size() < 2)
        expected_orgs.insert(org);
    for (const OrgExclusion& e : rep.excluded_organizations)
      got_orgs.insert(e.organization);
    CHECK(got_orgs == expected_orgs);
    CHECK(got_orgs.contains("zeta"));

    for (const DensityCurve& c : rep.curves) {
      CHECK(c.horizon_buckets == horizon);
      CHECK(c.n_subjects == kept[c.organization].size());
      CHECK(std::fabs(trapezoid_integral(c.grid, c.density) - 1.0) <= 1e-6);
    }
    CHECK(rep.curves.size() + got_orgs.size() == kept.size());
  }
}

TEST_CASE("org density reasons")
{
  std::vector<DensitySubject> subjects{
      {"a/short", "a", FitResult{{5, 1, 1, 1}, FitStatus::converged, 0, 5, 1}, {1, 2, 3, 4, 5}},
      {"a/weak", "a", FitResult{{0.5, 1, 1, 1}, FitStatus::converged, 0, 12, 1}, std::vector<double>(12, 1)},
      {"a/failed", "a", FitResult{kSentinelParams, FitStatus::failed_sentinel, 0, 12, 1}, std::vector<double>(12, 1)},
  };
  OrgDensityReport rep = org_density(subjects, {});
  REQUIRE(rep.excluded_subjects.size() == 3);
  CHECK(rep.excluded_subjects[0].reason == "series_too_short");
  CHECK(rep.excluded_subjects[1].reason == "fitness_out_of_range");
  CHECK(rep.excluded_subjects[2].reason == "not_converged");
  CHECK(rep.curves.empty());
}

TEST_CASE("forecast report")
{
  FitResult fit{{1, 0, 1, 1}, FitStatus::converged, 0, 10, 1};
  std::vector<double> targets{0.648721, 1e6};
  std::vector<double> horizons{2, 6, 12};
  ForecastReport r = forecast_report(fit, targets, horizons);
  REQUIRE(r.targets.size() == 2);
  CHECK(*r.targets[0].time_buckets == doctest::Approx(1.0).epsilon(1e-5));
  CHECK_FALSE(r.targets[1].time_buckets.has_value());
  CHECK(r.targets[1].ceiling == doctest::Approx(std::expm1(1.0)).epsilon(1e-15));
  for (std::size_t i = 0; i < horizons.size(); ++i)
    CHECK(r.horizons[i].value == evaluate(fit.params, horizons[i]).value);

  FitResult p{{4, 1.5, 0.8, 1}, FitStatus::converged, 0, 10, 1};
  std::vector<double> many;
  for (int i = 1; i < 50; ++i)
    many.push_back(ceiling(p.params).value * i / 50.0);
  for (const TargetForecast& t : forecast_report(p, many, {}).targets)
    CHECK(std::fabs(evaluate(p.params, *t.time_buckets).value - t.target) <= 1e-9 * t.target);

  FitResult failed{kSentinelParams, FitStatus::failed_sentinel, 0, 10, 1};
  try {
    forecast_report(failed, targets, horizons);
    FAIL("expected refusal");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::refused);
  }
}

TEST_CASE("csv writers")
{
  FitResult fit{{1, 0, 1, 1}, FitStatus::converged, 0, 10, 1};
  std::vector<double> targets{1e6};
  std::vector<double> horizons{2};
  std::string csv = forecast_csv(forecast_report(fit, targets, horizons), 30);
  CHECK(csv.rfind("direction,time_buckets,days_since_release,count,note\n", 0) == 0);
  CHECK(csv.find("unreachable (ceiling=1.718281828459045)") != std::string::npos);
  CHECK(csv.find("time_to_count,2,60,") != std::string::npos);

  CHECK(pareto_csv({0.2, 1, 5}, 0.8) == "item_count,total_items,item_fraction,mass_threshold\n1,5,0.2,0.8\n");
  CHECK(format_number(0.1 + 0.2) == "0.30000000000000004");
  CHECK(format_number(3.0) == "3");
}
