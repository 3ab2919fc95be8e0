#include "adoptfit/ingestion.hpp"

#include "adoptfit/error.hpp"
#include "adoptfit/registry.hpp"
#include "adoptfit/store.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace adoptfit {

std::string organization_of(std::string_view model_id)
{
  std::size_t slash = model_id.find('/');
  if (slash == std::string_view::npos || slash == 0 || slash + 1 == model_id.size() ||
      model_id.find('/', slash + 1) != std::string_view::npos)
    fail(ErrorKind::validation, "model id must look like org/name: '" + std::string(model_id) + "'");
  return std::string(model_id.substr(0, slash));
}

ModelMeta ModelMeta::make(std::string model_id, Instant created_at, std::uint64_t downloads_total,
                          std::vector<std::string> tags)
{
  ModelMeta m;
  m.organization = organization_of(model_id);
  m.model_id = std::move(model_id);
  m.created_at = created_at;
  m.downloads_total = downloads_total;
  m.tags = std::move(tags);
  return m;
}

void ModelMeta::validate() const
{
  if (organization_of(model_id) != organization)
    fail(ErrorKind::validation, "organization '" + organization + "' does not match id '" + model_id + "'");
}

std::string_view ModelMeta::bare_name() const
{
  std::string_view id = model_id;
  std::size_t slash = id.find('/');
  return slash == std::string_view::npos ? id : id.substr(slash + 1);
}

std::string_view to_string(EdgeRule rule)
{
  return rule == EdgeRule::tag_exact ? "tag_exact" : "name_substring";
}

EdgeRule parse_edge_rule(std::string_view text)
{
  if (text == "tag_exact")
    return EdgeRule::tag_exact;
  if (text == "name_substring")
    return EdgeRule::name_substring;
  fail(ErrorKind::validation, "unknown edge rule '" + std::string(text) + "'");
}

std::string_view to_string(SeriesKind kind)
{
  return kind == SeriesKind::finetunes ? "finetunes" : "downloads";
}

SeriesKind parse_series_kind(std::string_view text)
{
  if (text == "finetunes")
    return SeriesKind::finetunes;
  if (text == "downloads")
    return SeriesKind::downloads;
  fail(ErrorKind::validation, "unknown series kind '" + std::string(text) + "'");
}

namespace {

std::string lowercase(std::string_view s)
{
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

} // namespace

std::vector<FineTuneEdge> resolve_fine_tunes(std::string_view base_id, std::span<const ModelMeta> catalog,
                                             const MatchOptions& options)
{
  auto base_it = std::find_if(catalog.begin(), catalog.end(),
                              [&](const ModelMeta& m) { return m.model_id == base_id; });
  if (base_it == catalog.end())
    fail(ErrorKind::not_found, "base model '" + std::string(base_id) + "' is not in the catalog");
  const ModelMeta& base = *base_it;

  const std::string tag_plain = "base_model:" + base.model_id;
  const std::string tag_finetune = "base_model:finetune:" + base.model_id;
  const std::string needle = lowercase(base.bare_name());
  const bool name_rule = needle.size() >= options.name_match_min_length;

  std::vector<FineTuneEdge> edges;
  for (const ModelMeta& child : catalog) {
    if (child.model_id == base.model_id)
      continue;
    bool tagged = std::any_of(child.tags.begin(), child.tags.end(),
                              [&](const std::string& t) { return t == tag_plain || t == tag_finetune; });
    if (tagged) {
      edges.push_back({base.model_id, child.model_id, EdgeRule::tag_exact, child.created_at});
      continue;
    }
    if (name_rule && child.created_at >= base.created_at &&
        lowercase(child.bare_name()).find(needle) != std::string::npos)
      edges.push_back({base.model_id, child.model_id, EdgeRule::name_substring, child.created_at});
  }
  return edges;
}

SeriesBuild build_adoption_series(const ModelMeta& base, std::span<const FineTuneEdge> edges,
                                  double bucket_length_days, std::optional<Instant> observed_through)
{
  if (!(bucket_length_days > 0.0) || !std::isfinite(bucket_length_days))
    fail(ErrorKind::validation, "bucket_length_days must be positive");

  SeriesBuild out;
  std::vector<std::size_t> buckets;
  buckets.reserve(edges.size());
  for (const FineTuneEdge& e : edges) {
    if (e.base_id != base.model_id)
      fail(ErrorKind::validation, "edge " + e.child_id + " belongs to base " + e.base_id + ", not " + base.model_id);
    if (e.child_created_at < base.created_at) {
      ++out.excluded_edges;
      continue;
    }
    double age = days_between(base.created_at, e.child_created_at);
    buckets.push_back(static_cast<std::size_t>(std::floor(age / bucket_length_days)));
  }

  std::size_t length = 1;
  for (std::size_t b : buckets)
    length = std::max(length, b + 1);
  if (observed_through && *observed_through >= base.created_at) {
    double age = days_between(base.created_at, *observed_through);
    length = std::max(length, static_cast<std::size_t>(std::floor(age / bucket_length_days)) + 1);
  }

  std::vector<double> per_bucket(length, 0.0);
  for (std::size_t b : buckets)
    per_bucket[b] += 1.0;

  out.series.subject_id = base.model_id;
  out.series.release_instant = base.created_at;
  out.series.bucket_length_days = bucket_length_days;
  out.series.observation_offset_buckets = 0.0;
  out.series.cumulative.resize(length);
  double running = 0.0;
  for (std::size_t k = 0; k < length; ++k) {
    running += per_bucket[k];
    out.series.cumulative[k] = running;
  }
  out.series.validate();
  return out;
}

DownloadSeriesBuild build_download_series(std::span<const DownloadSnapshot> snapshots, Instant release)
{
  if (snapshots.size() < 2)
    fail(ErrorKind::insufficient_data, "a download series needs at least 2 snapshots");
  const std::string& id = snapshots.front().model_id;
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    if (snapshots[i].model_id != id)
      fail(ErrorKind::validation, "snapshots mix models '" + id + "' and '" + snapshots[i].model_id + "'");
    if (i > 0 && !(snapshots[i - 1].snapshot_date < snapshots[i].snapshot_date))
      fail(ErrorKind::validation, "snapshots of '" + id + "' are not strictly increasing by date");
  }
  Date release_day = date_of(release);
  Date first = snapshots.front().snapshot_date;
  if (first < release_day)
    fail(ErrorKind::validation, "snapshot of '" + id + "' predates its release");

  DownloadSeriesBuild out;
  out.series.subject_id = id;
  out.series.release_instant = release;
  out.series.bucket_length_days = 1.0;
  out.series.observation_offset_buckets = static_cast<double>((first - release_day).count());

  std::uint64_t previous = snapshots.front().downloads_total;
  Date day = first;
  for (const DownloadSnapshot& s : snapshots) {
    for (; day < s.snapshot_date; day += std::chrono::days{1})
      out.series.cumulative.push_back(static_cast<double>(previous));
    std::uint64_t value = s.downloads_total;
    if (value < previous) {
      out.anomalies.push_back({s.snapshot_date, previous, value});
      value = previous;
    }
    out.series.cumulative.push_back(static_cast<double>(value));
    previous = value;
    day = s.snapshot_date + std::chrono::days{1};
  }
  out.series.validate();
  return out;
}

bool is_early_model(const ModelMeta& model, Date cutoff)
{
  return date_of(model.created_at) < cutoff;
}

SnapshotReport record_download_snapshot(RegistryClient& client, std::span<const std::string> ids, Date date,
                                        const std::string& snapshot_log)
{
  SnapshotReport report;
  ModelBatch batch = client.fetch_models(ids);
  report.failed = std::move(batch.failed);
  for (const ModelMeta& m : batch.models) {
    DownloadSnapshot snap{m.model_id, date, m.downloads_total};
    if (append_snapshot(snapshot_log, snap))
      ++report.appended;
    else
      ++report.already_present;
  }
  return report;
}

} // namespace adoptfit
