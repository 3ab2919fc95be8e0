#pragma once

#include "adoptfit/records.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adoptfit {

class RegistryClient;

struct MatchOptions
{
  // Bare base names shorter than this never match by substring ("opt" would
  // match thousands of unrelated models).
  std::size_t name_match_min_length = 5;
};

//! Children of `base_id` in `catalog`. A child matches by tag when any tag is
//! "base_model:{base}" or "base_model:finetune:{base}"; otherwise by a
//! case-insensitive substring match of the bare names, provided the child was
//! created no earlier than the base. Throws Error(not_found) for an unknown base.
std::vector<FineTuneEdge> resolve_fine_tunes(std::string_view base_id, std::span<const ModelMeta> catalog,
                                             const MatchOptions& options = {});

struct SeriesBuild
{
  AdoptionSeries series;
  std::size_t excluded_edges = 0; // children dated before the base release
};

//! Bucket k counts children with floor(age_days / bucket_length_days) <= k.
//! The series runs through the newest edge, or through `observed_through`
//! when that is later.
SeriesBuild build_adoption_series(const ModelMeta& base, std::span<const FineTuneEdge> edges,
                                  double bucket_length_days = 30.0,
                                  std::optional<Instant> observed_through = std::nullopt);

struct CounterAnomaly
{
  Date date{};
  std::uint64_t previous = 0;
  std::uint64_t observed = 0;
};

struct DownloadSeriesBuild
{
  AdoptionSeries series;
  std::vector<CounterAnomaly> anomalies;
};

//! Daily series from snapshots of one model, sorted by date. Gaps are forward
//! filled; a decreasing counter is clamped and logged as an anomaly.
DownloadSeriesBuild build_download_series(std::span<const DownloadSnapshot> snapshots, Instant release);

//! Models created before `cutoff` (uploads that long predate their registry
//! listing) can be excluded from cohort analyses.
bool is_early_model(const ModelMeta& model, Date cutoff);

struct SnapshotReport
{
  std::size_t appended = 0;
  std::size_t already_present = 0;
  std::vector<std::pair<std::string, std::string>> failed; // (id, message)
};

//! Fetches the current download counter of every id and appends one snapshot
//! per id to the log at `snapshot_log`, skipping (id, date) pairs already
//! recorded. Per-id fetch failures are reported, not thrown.
SnapshotReport record_download_snapshot(RegistryClient& client, std::span<const std::string> ids, Date date,
                                        const std::string& snapshot_log);

} // namespace adoptfit
