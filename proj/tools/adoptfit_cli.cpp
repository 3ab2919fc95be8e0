//! adoptfit command-line entry point; talks to the library only through the C API.

#include "adoptfit/adoptfit.h"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitTransient = 2;

struct Failure {
  adoptfit_status status;
  std::string message;
};

void check(adoptfit_status status)
{
  if (status != ADOPTFIT_OK)
    throw Failure{status, adoptfit_last_error()};
}

int exit_code_for(adoptfit_status status)
{
  return status == ADOPTFIT_ERR_TRANSIENT ? kExitTransient : kExitError;
}

class Buffer {
public:
  Buffer() : ptr_(adoptfit_buffer_create())
  {
    if (!ptr_)
      throw Failure{ADOPTFIT_ERR_INTERNAL, "out of memory"};
  }
  ~Buffer() { adoptfit_buffer_destroy(ptr_); }
  Buffer(const Buffer&) = delete;
  Buffer& operator=(const Buffer&) = delete;

  adoptfit_buffer* get() { return ptr_; }
  std::string str() const { return {adoptfit_buffer_data(ptr_), adoptfit_buffer_size(ptr_)}; }

private:
  adoptfit_buffer* ptr_;
};

class Context {
public:
  Context() { check(adoptfit_context_create(&ptr_)); }
  ~Context() { adoptfit_context_destroy(ptr_); }
  Context(const Context&) = delete;
  Context& operator=(const Context&) = delete;

  adoptfit_context* get() { return ptr_; }

private:
  adoptfit_context* ptr_ = nullptr;
};

std::vector<const char*> c_strings(const std::vector<std::string>& items)
{
  std::vector<const char*> out;
  out.reserve(items.size());
  for (const auto& s : items)
    out.push_back(s.c_str());
  return out;
}

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

struct Globals {
  std::string config_path;
  std::string dataset;
  std::string registry_url;
  std::string registry_token;
  std::string fixture;
  std::string format = "csv";
  std::string out_path;
  int verbosity = 0;
};

struct IngestArgs {
  std::vector<std::string> orgs, bases;
  bool include_early = false;
};

struct SnapshotArgs {
  std::vector<std::string> ids;
  std::string date;
};

struct SeriesArgs {
  std::string kind = "finetunes";
  double bucket_days = 30;
  std::string as_of;
  std::vector<std::string> bases;
  bool include_early = false;
};

struct FitArgs {
  std::string subject;
  bool all = false;
  std::string kind = "finetunes";
  uint64_t seed = 0;
  int restarts = 8;
  int max_iterations = 500;
  double tol = 1e-10;
};

struct ForecastArgs {
  std::string subject;
  std::string kind = "auto";
  std::vector<double> targets;
  std::vector<double> horizons;
};

struct AnalyzeArgs {
  std::string kind = "finetunes";
  double threshold = 0.8;
  std::string scale = "log10";
  size_t bins = 20;
  std::optional<double> range_low, range_high;
  std::vector<size_t> horizons{2, 6, 12};
  double fitness_low = 1, fitness_high = 10;
  size_t grid = 512;
};

void emit(const Globals& g, const std::string& text)
{
  if (g.out_path.empty()) {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream f(g.out_path, std::ios::binary | std::ios::trunc);
  f << text;
  f.flush();
  if (!f)
    throw Failure{ADOPTFIT_ERR_IO, "cannot write " + g.out_path};
}

void configure(Context& ctx, const Globals& g)
{
  if (!g.config_path.empty())
    check(adoptfit_context_load_config(ctx.get(), g.config_path.c_str()));
  check(adoptfit_context_apply_env(ctx.get()));
  if (!g.registry_url.empty())
    check(adoptfit_context_set(ctx.get(), "base_url", g.registry_url.c_str()));
  if (!g.registry_token.empty())
    check(adoptfit_context_set(ctx.get(), "auth_token", g.registry_token.c_str()));
  if (!g.dataset.empty())
    check(adoptfit_context_set(ctx.get(), "dataset_root", g.dataset.c_str()));
  if (!g.fixture.empty())
    check(adoptfit_context_use_fixture(ctx.get(), g.fixture.c_str()));
}

void require_tabular(const Globals& g, const char* what)
{
  if (g.format != "csv")
    throw Failure{ADOPTFIT_ERR_VALIDATION, std::string(what) + " only writes csv"};
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Fit and forecast adoption curves of open-weight models"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path, "JSON config file (overridden by environment, then flags)");
  app.add_option("--dataset", g.dataset, "Dataset root directory (env DATASET_ROOT)");
  app.add_option("--registry-url", g.registry_url, "Registry base URL (env REGISTRY_URL)");
  app.add_option("--registry-token", g.registry_token, "Registry bearer token (env REGISTRY_TOKEN)");
  app.add_option("--fixture", g.fixture, "Serve this directory as the registry instead of the network");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "jsonl", "svg"}));
  app.add_option("--out", g.out_path, "Write output to this file instead of stdout");
  app.add_flag("-v,--verbose", g.verbosity, "Report progress on stderr (repeatable)");

  IngestArgs ia;
  auto* ingest = app.add_subcommand("ingest", "Fetch the model catalog and fine-tune edges");
  ingest->add_option("--org", ia.orgs, "Organization whose models are base candidates (repeatable)");
  ingest->add_option("--base", ia.bases, "Explicit base model id (repeatable)");
  ingest->add_flag("--include-early", ia.include_early, "Keep models created before the early-model cutoff");

  SnapshotArgs sa;
  auto* snapshot = app.add_subcommand("snapshot", "Record today's download totals");
  snapshot->add_option("--id", sa.ids, "Model id to snapshot (repeatable; default: whole catalog)");
  snapshot->add_option("--date", sa.date, "Snapshot date YYYY-MM-DD (default: today UTC)");

  SeriesArgs se;
  auto* series = app.add_subcommand("series", "Build adoption series from stored edges or snapshots");
  series->add_option("--kind", se.kind, "Series kind")->check(CLI::IsMember({"finetunes", "downloads"}));
  series->add_option("--bucket-days", se.bucket_days, "Bucket length in days for fine-tune series")
      ->check(CLI::PositiveNumber);
  series->add_option("--as-of", se.as_of, "Observe fine-tunes through this RFC 3339 instant");
  series->add_option("--base", se.bases, "Additional base model id (repeatable)");
  series->add_flag("--include-early", se.include_early, "Keep models created before the early-model cutoff");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit stored series and upsert fits.jsonl");
  auto* subject_opt = fit->add_option("--subject", fa.subject, "Subject model id");
  auto* all_opt = fit->add_flag("--all", fa.all, "Fit every stored series of the kind");
  subject_opt->excludes(all_opt);
  fit->add_option("--kind", fa.kind, "Series kind")->check(CLI::IsMember({"finetunes", "downloads"}));
  fit->add_option("--seed", fa.seed, "Seed for restart perturbations");
  fit->add_option("--restarts", fa.restarts, "Number of restarts")->check(CLI::Range(1, 1000));
  fit->add_option("--max-iterations", fa.max_iterations, "Iteration cap per restart")->check(CLI::Range(1, 1000000));
  fit->add_option("--tol", fa.tol, "Relative convergence tolerance")->check(CLI::PositiveNumber);

  ForecastArgs fo;
  auto* forecast = app.add_subcommand("forecast", "Report reach times for targets and values at horizons");
  forecast->add_option("--subject", fo.subject, "Subject model id")->required();
  forecast->add_option("--kind", fo.kind, "Fit kind (auto prefers downloads)")
      ->check(CLI::IsMember({"auto", "finetunes", "downloads"}));
  forecast->add_option("--target", fo.targets, "Cumulative count to reach (repeatable)");
  forecast->add_option("--horizon", fo.horizons, "Time in buckets since release (repeatable)");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Ecosystem analytics over stored fits");
  analyze->require_subcommand(1, 1);
  auto add_kind = [&](CLI::App* sub) {
    sub->add_option("--kind", an.kind, "Series kind")->check(CLI::IsMember({"finetunes", "downloads"}));
  };
  auto* pareto = analyze->add_subcommand("pareto", "Smallest share of models holding a share of the total");
  add_kind(pareto);
  pareto->add_option("--threshold", an.threshold, "Mass threshold in (0, 1]");
  auto* params = analyze->add_subcommand("params", "Histograms of fitted lambda, mu and sigma");
  add_kind(params);
  params->add_option("--scale", an.scale, "Bin scale")->check(CLI::IsMember({"linear", "log10"}));
  params->add_option("--bins", an.bins, "Number of bins")->check(CLI::Range(size_t{1}, size_t{100000}));
  params->add_option("--range-low", an.range_low, "Lower histogram edge (with --range-high)");
  params->add_option("--range-high", an.range_high, "Upper histogram edge (with --range-low)");
  auto* pairwise = analyze->add_subcommand("pairwise", "Pairwise scatter data of fitted parameters");
  add_kind(pairwise);
  auto* density = analyze->add_subcommand("org-density", "Per-organization density of counts at horizons");
  add_kind(density);
  density->add_option("--horizon", an.horizons, "Horizon in buckets (repeatable)");
  density->add_option("--fitness-low", an.fitness_low, "Lowest lambda kept");
  density->add_option("--fitness-high", an.fitness_high, "Highest lambda kept");
  density->add_option("--grid", an.grid, "Density grid size")->check(CLI::Range(size_t{2}, size_t{1000000}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[validation]: " << e.what() << "\n";
    return kExitError;
  }

  try {
    Context ctx;
    configure(ctx, g);
    Buffer out;
    if (g.verbosity > 0)
      std::cerr << "adoptfit: running " << app.get_subcommands().front()->get_name() << "\n";

    if (*ingest) {
      require_tabular(g, "ingest");
      auto orgs = c_strings(ia.orgs);
      auto bases = c_strings(ia.bases);
      check(adoptfit_ingest(ctx.get(), orgs.data(), orgs.size(), bases.data(), bases.size(), ia.include_early,
                            out.get()));
    } else if (*snapshot) {
      require_tabular(g, "snapshot");
      auto ids = c_strings(sa.ids);
      check(adoptfit_snapshot(ctx.get(), ids.data(), ids.size(), or_null(sa.date), out.get()));
    } else if (*series) {
      require_tabular(g, "series");
      auto bases = c_strings(se.bases);
      check(adoptfit_build_series(ctx.get(), se.kind.c_str(), se.bucket_days, or_null(se.as_of), se.include_early,
                                  bases.data(), bases.size(), out.get()));
    } else if (*fit) {
      require_tabular(g, "fit");
      if (fa.subject.empty() && !fa.all)
        throw Failure{ADOPTFIT_ERR_VALIDATION, "fit needs --subject or --all"};
      adoptfit_fit_options options;
      adoptfit_fit_options_default(&options);
      options.rng_seed = fa.seed;
      options.n_restarts = fa.restarts;
      options.max_iterations = fa.max_iterations;
      options.convergence_tol = fa.tol;
      check(adoptfit_fit(ctx.get(), or_null(fa.subject), fa.kind.c_str(), &options, out.get()));
    } else if (*forecast) {
      require_tabular(g, "forecast");
      check(adoptfit_forecast(ctx.get(), fo.subject.c_str(), fo.kind.c_str(), fo.targets.data(), fo.targets.size(),
                              fo.horizons.data(), fo.horizons.size(), out.get()));
    } else if (*pareto) {
      check(adoptfit_analyze_pareto(ctx.get(), an.kind.c_str(), an.threshold, g.format.c_str(), out.get()));
    } else if (*params) {
      if (an.range_low.has_value() != an.range_high.has_value())
        throw Failure{ADOPTFIT_ERR_VALIDATION, "--range-low and --range-high go together"};
      check(adoptfit_analyze_params(ctx.get(), an.kind.c_str(), an.scale.c_str(), an.bins, an.range_low.has_value(),
                                    an.range_low.value_or(0), an.range_high.value_or(0), g.format.c_str(),
                                    out.get()));
    } else if (*pairwise) {
      check(adoptfit_analyze_pairwise(ctx.get(), an.kind.c_str(), g.format.c_str(), out.get()));
    } else if (*density) {
      check(adoptfit_analyze_org_density(ctx.get(), an.kind.c_str(), an.horizons.data(), an.horizons.size(),
                                         an.fitness_low, an.fitness_high, an.grid, g.format.c_str(), out.get()));
    }
    emit(g, out.str());
  } catch (const Failure& f) {
    std::cerr << "error[" << adoptfit_status_name(f.status) << "]: " << f.message << "\n";
    return exit_code_for(f.status);
  }
  return kExitOk;
}
