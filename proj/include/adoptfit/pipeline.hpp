#pragma once

// End-to-end operations over a dataset directory, as driven by the CLI:
// ingest -> snapshot -> series -> fit -> forecast / analyze.
// Every operation returns its textual output; files under the dataset root
// are rewritten atomically.

#include "adoptfit/analytics.hpp"
#include "adoptfit/config.hpp"
#include "adoptfit/fitter.hpp"
#include "adoptfit/registry.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace adoptfit {

enum class OutputFormat
{
  csv,
  jsonl,
  svg
};

OutputFormat parse_output_format(std::string_view text);

//! Rewrites a CSV table (header + rows, no quoting) as one JSON object per row.
std::string csv_to_jsonl(const std::string& csv);

class Pipeline
{
public:
  explicit Pipeline(Settings settings, RegistryClient::Sleeper sleeper = {});

  const Settings& settings() const { return settings_; }

  //! Fetches the catalog (all of it, or the given organizations), selects the
  //! bases (given ids, or every non-early model without a base_model tag) and
  //! writes catalog.jsonl and edges.jsonl.
  std::string ingest(std::span<const std::string> organizations, std::span<const std::string> bases,
                     bool include_early);

  //! Appends today's (or `date`'s) download counters for the ids, or for the
  //! whole catalog when none are given.
  std::string snapshot(std::span<const std::string> ids, std::optional<Date> date);

  //! Builds series/ files. Fine-tune series cover every base in edges.jsonl
  //! plus `extra_bases`; download series cover every model with at least two
  //! snapshots.
  std::string build_series(SeriesKind kind, double bucket_length_days, std::optional<Instant> as_of,
                           bool include_early, std::span<const std::string> extra_bases);

  //! Fits one subject (or all series of the kind) and upserts fits.jsonl.
  std::string fit(const std::optional<std::string>& subject, SeriesKind kind, const FitOptions& options);

  //! Without a kind, the downloads fit is used when one exists.
  std::string forecast(const std::string& subject, std::optional<SeriesKind> kind, std::span<const double> targets,
                       std::span<const double> horizons);

  std::string analyze_pareto(SeriesKind kind, double threshold, OutputFormat format);
  std::string analyze_params(SeriesKind kind, const HistogramSpec& spec, OutputFormat format);
  std::string analyze_pairwise(SeriesKind kind, OutputFormat format);
  std::string analyze_org_density(SeriesKind kind, std::span<const std::size_t> horizons, double fitness_low,
                                  double fitness_high, std::size_t grid_size, OutputFormat format);

private:
  Settings settings_;
  RegistryClient::Sleeper sleeper_;
};

} // namespace adoptfit
