#include "adoptfit/fitter.hpp"

#include "adoptfit/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

namespace adoptfit {

void AdoptionSeries::validate() const
{
  if (cumulative.empty())
    fail(ErrorKind::validation, "series '" + subject_id + "' is empty");
  if (!(bucket_length_days > 0.0) || !std::isfinite(bucket_length_days))
    fail(ErrorKind::validation, "bucket_length_days must be positive");
  if (!(observation_offset_buckets >= 0.0) || !std::isfinite(observation_offset_buckets))
    fail(ErrorKind::validation, "observation_offset_buckets must be >= 0");
  double prev = 0.0;
  for (std::size_t k = 0; k < cumulative.size(); ++k) {
    double v = cumulative[k];
    if (!(v >= 0.0) || !std::isfinite(v))
      fail(ErrorKind::validation, "series '" + subject_id + "' has a negative or non-finite count at bucket " +
                                      std::to_string(k));
    if (v < prev)
      fail(ErrorKind::validation, "series '" + subject_id + "' decreases at bucket " + std::to_string(k));
    prev = v;
  }
}

std::string_view to_string(FitStatus status)
{
  switch (status) {
    case FitStatus::converged: return "converged";
    case FitStatus::failed_sentinel: return "failed_sentinel";
    case FitStatus::bound_degenerate: return "bound_degenerate";
  }
  return "failed_sentinel";
}

FitStatus parse_fit_status(std::string_view text)
{
  if (text == "converged")
    return FitStatus::converged;
  if (text == "failed_sentinel")
    return FitStatus::failed_sentinel;
  if (text == "bound_degenerate")
    return FitStatus::bound_degenerate;
  fail(ErrorKind::validation, "unknown fit status '" + std::string(text) + "'");
}

bool ParamBox::near_edge(double value, double rel_tol) const
{
  auto close = [&](double bound) {
    double scale = bound != 0.0 ? std::abs(bound) : 1.0;
    return std::abs(value - bound) <= rel_tol * scale;
  };
  return value <= low || value >= high || close(low) || close(high);
}

void FitOptions::validate() const
{
  for (const ParamBox* box : {&bounds.lambda, &bounds.mu, &bounds.sigma})
    if (!(box->low < box->high))
      fail(ErrorKind::validation, "fit bounds need low < high");
  if (!(bounds.lambda.low > 0.0) || !(bounds.sigma.low > 0.0))
    fail(ErrorKind::validation, "lambda and sigma bounds must be positive");
  if (max_iterations < 1)
    fail(ErrorKind::validation, "max_iterations must be positive");
  if (n_restarts < 1)
    fail(ErrorKind::validation, "n_restarts must be positive");
  if (!(convergence_tol > 0.0))
    fail(ErrorKind::validation, "convergence_tol must be positive");
  if (!(m > 0.0) || !std::isfinite(m))
    fail(ErrorKind::validation, "m must be positive");
}

namespace {

using Vec3 = Eigen::Vector3d;

Vec3 to_vec(const FitParams& p) { return {p.lambda, p.mu, p.sigma}; }

FitParams to_params(const Vec3& v, double m) { return {v[0], v[1], v[2], m}; }

Vec3 clamp_to(const FitBounds& b, Vec3 v)
{
  v[0] = std::clamp(v[0], b.lambda.low, b.lambda.high);
  v[1] = std::clamp(v[1], b.mu.low, b.mu.high);
  v[2] = std::clamp(v[2], b.sigma.low, b.sigma.high);
  return v;
}

bool interior(const FitBounds& b, const Vec3& v)
{
  return !b.lambda.near_edge(v[0], kBoundRelTol) && !b.mu.near_edge(v[1], kBoundRelTol) &&
         !b.sigma.near_edge(v[2], kBoundRelTol);
}

// Observation times and log-transformed targets of one series.
struct Problem
{
  std::vector<double> log_times;
  std::vector<double> targets;
  double m;

  double cost(const Vec3& v) const
  {
    double sum = 0.0;
    for (std::size_t k = 0; k < targets.size(); ++k) {
      double z = (log_times[k] - v[1]) / v[2];
      double r = targets[k] - v[0] * 0.5 * std::erfc(-z * 0.70710678118654752440);
      sum += r * r;
    }
    return 0.5 * sum;
  }

  double rmse(double cost) const { return std::sqrt(2.0 * cost / static_cast<double>(targets.size())); }

  // Residuals this small are rounding noise in the targets themselves.
  double noise_floor_cost() const
  {
    double scale = 1.0;
    for (double y : targets)
      scale = std::max(scale, std::abs(y));
    double r = 4.0 * std::numeric_limits<double>::epsilon() * scale;
    return 0.5 * r * r * static_cast<double>(targets.size());
  }
};

Problem make_problem(const AdoptionSeries& series, double m)
{
  Problem pb;
  pb.m = m;
  pb.log_times.reserve(series.size());
  pb.targets.reserve(series.size());
  for (std::size_t k = 0; k < series.size(); ++k) {
    pb.log_times.push_back(std::log(series.time_at(k)));
    pb.targets.push_back(std::log1p(series.cumulative[k] / m));
  }
  return pb;
}

struct Trial
{
  Vec3 point;
  double cost = std::numeric_limits<double>::infinity();
  bool converged = false;
};

bool small_step(const Vec3& step, const Vec3& point, double tol)
{
  return step.norm() <= tol * (point.norm() + tol);
}

// Levenberg-Marquardt with Marquardt diagonal scaling; steps are projected
// onto the box. Stops when an accepted step is below tolerance, when the
// residual or gradient vanishes, or when damping blows up (stall).
Trial levenberg_marquardt(const Problem& pb, const FitBounds& bounds, Vec3 point, int max_iterations,
                          double tol)
{
  const std::size_t n = pb.targets.size();
  point = clamp_to(bounds, point);
  double cost = pb.cost(point);
  double damping = 1e-3;

  Trial out{point, cost, false};
  const double floor_cost = pb.noise_floor_cost();
  Eigen::MatrixXd jac(n, 3);
  Eigen::VectorXd res(n);

  for (int iter = 0; iter < max_iterations; ++iter) {
    FitParams p = to_params(point, pb.m);
    for (std::size_t k = 0; k < n; ++k) {
      double t = std::exp(pb.log_times[k]);
      Gradient g = log_gradient(p, t);
      jac(k, 0) = g.d_lambda;
      jac(k, 1) = g.d_mu;
      jac(k, 2) = g.d_sigma;
      res(k) = pb.targets[k] - log_evaluate(p, t);
    }
    Eigen::Matrix3d normal = jac.transpose() * jac;
    Vec3 grad = jac.transpose() * res;
    if (cost <= floor_cost || grad.lpNorm<Eigen::Infinity>() == 0.0) {
      out = {point, cost, true};
      return out;
    }

    double diag_floor = std::max(normal.diagonal().maxCoeff() * 1e-15, 1e-300);
    bool accepted = false;
    while (!accepted) {
      Eigen::Matrix3d damped = normal;
      for (int i = 0; i < 3; ++i)
        damped(i, i) += damping * std::max(normal(i, i), diag_floor);
      Vec3 delta = damped.ldlt().solve(grad);
      if (!delta.allFinite()) {
        damping *= 4.0;
      } else {
        Vec3 candidate = clamp_to(bounds, point + delta);
        double new_cost = pb.cost(candidate);
        if (new_cost < cost) {
          Vec3 step = candidate - point;
          point = candidate;
          cost = new_cost;
          damping = std::max(damping / 3.0, 1e-12);
          accepted = true;
          if (small_step(step, point, tol)) {
            out = {point, cost, true};
            return out;
          }
        } else {
          Vec3 step = candidate - point;
          // A rejected step that does not move the point means the box or
          // rounding has pinned us; nothing further to gain.
          if (small_step(step, point, tol) && damping > 1e6) {
            out = {point, cost, true};
            return out;
          }
          damping *= 4.0;
        }
      }
      if (damping > 1e16) {
        out = {point, cost, false};
        return out;
      }
    }
  }
  out = {point, cost, false};
  return out;
}

// Bounded Nelder-Mead on the same objective, used when LM stalls.
Vec3 nelder_mead(const Problem& pb, const FitBounds& bounds, const Vec3& start, int max_iterations, double tol)
{
  std::array<Vec3, 4> simplex;
  std::array<double, 4> values;
  simplex[0] = clamp_to(bounds, start);
  for (int i = 0; i < 3; ++i) {
    Vec3 v = simplex[0];
    double h = v[i] != 0.0 ? 0.1 * std::abs(v[i]) : 0.1;
    v[i] += h;
    simplex[i + 1] = clamp_to(bounds, v);
    if (simplex[i + 1] == simplex[0]) {
      v[i] = simplex[0][i] - h;
      simplex[i + 1] = clamp_to(bounds, v);
    }
  }
  for (int i = 0; i < 4; ++i)
    values[i] = pb.cost(simplex[i]);

  std::array<int, 4> order{0, 1, 2, 3};
  for (int iter = 0; iter < max_iterations; ++iter) {
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
    int best = order[0], worst = order[3], second = order[2];

    double spread = std::abs(values[worst] - values[best]);
    double diameter = 0.0;
    for (int i = 1; i < 4; ++i)
      diameter = std::max(diameter, (simplex[order[i]] - simplex[best]).norm());
    if (diameter <= tol * (simplex[best].norm() + tol) && spread <= tol * (std::abs(values[best]) + tol))
      break;

    Vec3 centroid = (simplex[order[0]] + simplex[order[1]] + simplex[order[2]]) / 3.0;
    Vec3 reflected = clamp_to(bounds, centroid + (centroid - simplex[worst]));
    double fr = pb.cost(reflected);
    if (fr < values[best]) {
      Vec3 expanded = clamp_to(bounds, centroid + 2.0 * (centroid - simplex[worst]));
      double fe = pb.cost(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
      continue;
    }
    Vec3 contracted = fr < values[worst] ? clamp_to(bounds, centroid + 0.5 * (reflected - centroid))
                                         : clamp_to(bounds, centroid + 0.5 * (simplex[worst] - centroid));
    double fc = pb.cost(contracted);
    if (fc < std::min(fr, values[worst])) {
      simplex[worst] = contracted;
      values[worst] = fc;
      continue;
    }
    for (int i = 1; i < 4; ++i) {
      int idx = order[i];
      simplex[idx] = clamp_to(bounds, simplex[best] + 0.5 * (simplex[idx] - simplex[best]));
      values[idx] = pb.cost(simplex[idx]);
    }
  }
  int best = 0;
  for (int i = 1; i < 4; ++i)
    if (values[i] < values[best])
      best = i;
  return simplex[best];
}

Trial run_restart(const Problem& pb, const FitOptions& options, const Vec3& start)
{
  Trial lm = levenberg_marquardt(pb, options.bounds, start, options.max_iterations, options.convergence_tol);
  if (lm.converged)
    return lm;
  Vec3 refined = nelder_mead(pb, options.bounds, lm.point, 20 * options.max_iterations, options.convergence_tol);
  Trial polished =
      levenberg_marquardt(pb, options.bounds, refined, options.max_iterations, options.convergence_tol);
  if (polished.cost <= lm.cost)
    return polished;
  return lm;
}

} // namespace

std::vector<double> residuals(const FitParams& params, const AdoptionSeries& series)
{
  params.validate();
  series.validate();
  std::vector<double> out;
  out.reserve(series.size());
  for (std::size_t k = 0; k < series.size(); ++k)
    out.push_back(std::log1p(series.cumulative[k] / params.m) - log_evaluate(params, series.time_at(k)));
  return out;
}

double rmse_log(const FitParams& params, const AdoptionSeries& series)
{
  std::vector<double> r = residuals(params, series);
  double sum = 0.0;
  for (double v : r)
    sum += v * v;
  return std::sqrt(sum / static_cast<double>(r.size()));
}

FitParams default_initialization(const AdoptionSeries& series)
{
  series.validate();
  std::vector<double> times;
  times.reserve(series.size());
  for (std::size_t k = 0; k < series.size(); ++k)
    times.push_back(series.time_at(k));
  std::size_t n = times.size();
  double median = n % 2 == 1 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);

  FitParams p;
  p.lambda = std::log1p(series.cumulative.back());
  p.mu = std::log(median);
  p.sigma = 1.0;
  p.m = 1.0;
  return p;
}

std::vector<FitParams> restart_points(const AdoptionSeries& series, const FitOptions& options)
{
  options.validate();
  FitParams base = default_initialization(series);
  base.m = options.m;
  base.lambda = std::log1p(series.cumulative.back() / options.m);

  std::mt19937_64 rng(options.rng_seed);
  std::uniform_real_distribution<double> log_factor(std::log(0.25), std::log(4.0));

  std::vector<FitParams> out;
  out.reserve(static_cast<std::size_t>(options.n_restarts));
  out.push_back(base);
  for (int i = 1; i < options.n_restarts; ++i) {
    Vec3 v = to_vec(base);
    for (int j = 0; j < 3; ++j)
      v[j] *= std::exp(log_factor(rng));
    out.push_back(to_params(v, options.m));
  }
  for (FitParams& p : out)
    p = to_params(clamp_to(options.bounds, to_vec(p)), options.m);
  return out;
}

bool transition_unresolved(const FitParams& params, const AdoptionSeries& series)
{
  constexpr double kZ99 = 2.3263478740408408;
  double lo = std::exp(params.mu - kZ99 * params.sigma);
  double hi = std::exp(params.mu + kZ99 * params.sigma);
  bool before = false, inside = false, after = false;
  for (std::size_t k = 0; k < series.size(); ++k) {
    double t = series.time_at(k);
    if (t < lo)
      before = true;
    else if (t > hi)
      after = true;
    else
      inside = true;
  }
  return before && after && !inside;
}

FitResult fit_series(const AdoptionSeries& series, const FitOptions& options)
{
  series.validate();
  options.validate();
  if (series.size() < 4)
    fail(ErrorKind::insufficient_data,
         "series '" + series.subject_id + "' has " + std::to_string(series.size()) + " points; need at least 4");
  if (series.cumulative.back() <= 0.0)
    fail(ErrorKind::insufficient_data, "series '" + series.subject_id + "' has no nonzero counts");

  Problem pb = make_problem(series, options.m);
  std::vector<FitParams> starts = restart_points(series, options);

  std::vector<Trial> trials;
  trials.reserve(starts.size());
  for (const FitParams& start : starts) {
    trials.push_back(run_restart(pb, options, to_vec(start)));
    const Trial& t = trials.back();
    // An exact interpolation cannot be improved on by further restarts.
    if (t.converged && t.cost == 0.0 && interior(options.bounds, t.point) &&
        !transition_unresolved(to_params(t.point, options.m), series))
      break;
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < trials.size(); ++i)
    if (trials[i].cost < trials[best].cost)
      best = i;
  double best_rmse = pb.rmse(trials[best].cost);

  std::ptrdiff_t accepted = -1;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const Trial& t = trials[i];
    if (!t.converged || !interior(options.bounds, t.point))
      continue;
    if (transition_unresolved(to_params(t.point, options.m), series))
      continue;
    if (pb.rmse(t.cost) > 10.0 * best_rmse)
      continue;
    if (accepted < 0 || t.cost < trials[static_cast<std::size_t>(accepted)].cost)
      accepted = static_cast<std::ptrdiff_t>(i);
  }

  FitResult result;
  result.n_points = series.size();
  result.n_restarts_used = static_cast<int>(trials.size());
  if (accepted >= 0) {
    const Trial& t = trials[static_cast<std::size_t>(accepted)];
    result.params = to_params(t.point, options.m);
    result.status = FitStatus::converged;
    result.rmse_log = pb.rmse(t.cost);
  } else if (!interior(options.bounds, trials[best].point)) {
    result.params = to_params(trials[best].point, options.m);
    result.status = FitStatus::bound_degenerate;
    result.rmse_log = best_rmse;
  } else {
    result.params = kSentinelParams;
    result.status = FitStatus::failed_sentinel;
    result.rmse_log = rmse_log(kSentinelParams, series);
  }
  return result;
}

} // namespace adoptfit
