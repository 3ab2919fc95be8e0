#include "adoptfit/pipeline.hpp"

#include "adoptfit/error.hpp"
#include "adoptfit/ingestion.hpp"
#include "adoptfit/plot.hpp"
#include "adoptfit/store.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <sstream>

namespace adoptfit {

OutputFormat parse_output_format(std::string_view text)
{
  if (text == "csv")
    return OutputFormat::csv;
  if (text == "jsonl")
    return OutputFormat::jsonl;
  if (text == "svg")
    return OutputFormat::svg;
  fail(ErrorKind::validation, "unknown output format '" + std::string(text) + "'");
}

namespace {

std::vector<std::string> split(const std::string& line, char sep)
{
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep))
    out.push_back(cell);
  if (!line.empty() && line.back() == sep)
    out.emplace_back();
  return out;
}

nlohmann::ordered_json cell_value(const std::string& cell)
{
  if (cell.empty())
    return nullptr;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec == std::errc() && ptr == cell.data() + cell.size()) {
    std::int64_t i = 0;
    auto [iptr, iec] = std::from_chars(cell.data(), cell.data() + cell.size(), i);
    if (iec == std::errc() && iptr == cell.data() + cell.size())
      return i;
    return v;
  }
  return cell;
}

std::string render(const std::string& csv, OutputFormat format)
{
  if (format == OutputFormat::jsonl)
    return csv_to_jsonl(csv);
  return csv;
}

std::vector<std::string> select_bases(const std::vector<ModelMeta>& catalog, std::span<const std::string> explicit_bases,
                                      bool include_early, Date cutoff)
{
  std::vector<std::string> out;
  if (!explicit_bases.empty()) {
    for (const std::string& id : explicit_bases) {
      bool known = std::any_of(catalog.begin(), catalog.end(), [&](const ModelMeta& m) { return m.model_id == id; });
      if (!known)
        fail(ErrorKind::not_found, "base model '" + id + "' is not in the catalog");
      out.push_back(id);
    }
    return out;
  }
  for (const ModelMeta& m : catalog) {
    bool derived = std::any_of(m.tags.begin(), m.tags.end(),
                               [](const std::string& t) { return t.rfind("base_model:", 0) == 0; });
    if (derived)
      continue;
    if (!include_early && is_early_model(m, cutoff))
      continue;
    out.push_back(m.model_id);
  }
  return out;
}

const FitRecord& find_fit(const std::vector<FitRecord>& fits, const std::string& subject, SeriesKind kind)
{
  for (const FitRecord& f : fits)
    if (f.subject_id == subject && f.series_kind == kind)
      return f;
  fail(ErrorKind::not_found, "no " + std::string(to_string(kind)) + " fit stored for '" + subject + "'");
}

std::vector<FitRecord> fits_of_kind(const Dataset& ds, SeriesKind kind)
{
  std::vector<FitRecord> fits = ds.load_fits();
  std::erase_if(fits, [&](const FitRecord& f) { return f.series_kind != kind; });
  return fits;
}

} // namespace

std::string csv_to_jsonl(const std::string& csv)
{
  std::istringstream is(csv);
  std::string line;
  if (!std::getline(is, line))
    return {};
  std::vector<std::string> header = split(line, ',');
  std::string out;
  while (std::getline(is, line)) {
    if (line.empty())
      continue;
    std::vector<std::string> cells = split(line, ',');
    nlohmann::ordered_json row;
    for (std::size_t i = 0; i < header.size(); ++i)
      row[header[i]] = cell_value(i < cells.size() ? cells[i] : std::string());
    out += row.dump();
    out += '\n';
  }
  return out;
}

Pipeline::Pipeline(Settings settings, RegistryClient::Sleeper sleeper)
  : settings_(std::move(settings))
  , sleeper_(std::move(sleeper))
{}

std::string Pipeline::ingest(std::span<const std::string> organizations, std::span<const std::string> bases,
                             bool include_early)
{
  RegistryClient client(settings_.registry, sleeper_);
  std::vector<ModelMeta> catalog;
  std::set<std::string> seen;
  std::size_t skipped = 0;
  auto absorb = [&](ModelPage page) {
    skipped += page.skipped;
    for (ModelMeta& m : page.models)
      if (seen.insert(m.model_id).second)
        catalog.push_back(std::move(m));
  };
  if (organizations.empty())
    absorb(client.fetch_all(std::nullopt));
  for (const std::string& org : organizations)
    absorb(client.fetch_all(org));
  std::sort(catalog.begin(), catalog.end(),
            [](const ModelMeta& a, const ModelMeta& b) { return a.model_id < b.model_id; });

  std::vector<std::string> base_ids =
      select_bases(catalog, bases, include_early, settings_.registry.early_cutoff_date);
  MatchOptions match{settings_.registry.name_match_min_length};
  std::vector<FineTuneEdge> edges;
  std::size_t tag_edges = 0;
  for (const std::string& base : base_ids) {
    for (FineTuneEdge& e : resolve_fine_tunes(base, catalog, match)) {
      tag_edges += e.detected_via == EdgeRule::tag_exact;
      edges.push_back(std::move(e));
    }
  }

  Dataset ds(settings_.dataset_root);
  save_typed(ds.catalog_path(), catalog);
  save_typed(ds.edges_path(), edges);

  std::ostringstream os;
  os << "models," << catalog.size() << '\n'
     << "skipped_records," << skipped << '\n'
     << "bases," << base_ids.size() << '\n'
     << "edges," << edges.size() << '\n'
     << "edges_tag_exact," << tag_edges << '\n'
     << "edges_name_substring," << edges.size() - tag_edges << '\n';
  return os.str();
}

std::string Pipeline::snapshot(std::span<const std::string> ids, std::optional<Date> date)
{
  Dataset ds(settings_.dataset_root);
  std::vector<std::string> targets(ids.begin(), ids.end());
  if (targets.empty())
    for (const ModelMeta& m : ds.load_catalog())
      targets.push_back(m.model_id);

  RegistryClient client(settings_.registry, sleeper_);
  SnapshotReport report =
      record_download_snapshot(client, targets, date.value_or(today_utc()), ds.snapshots_path().string());
  if (!targets.empty() && report.failed.size() == targets.size())
    fail(ErrorKind::transient, "every snapshot fetch failed; first: " + report.failed.front().first + ": " +
                                   report.failed.front().second);

  std::ostringstream os;
  os << "appended," << report.appended << '\n' << "already_present," << report.already_present << '\n'
     << "failed," << report.failed.size() << '\n';
  for (const auto& [id, message] : report.failed)
    os << "failed_id," << id << '\n';
  return os.str();
}

std::string Pipeline::build_series(SeriesKind kind, double bucket_length_days, std::optional<Instant> as_of,
                                   bool include_early, std::span<const std::string> extra_bases)
{
  Dataset ds(settings_.dataset_root);
  std::vector<ModelMeta> catalog = ds.load_catalog();
  std::map<std::string, const ModelMeta*> by_id;
  for (const ModelMeta& m : catalog)
    by_id.emplace(m.model_id, &m);

  std::ostringstream os;
  std::size_t written = 0, skipped = 0, excluded_edges = 0, anomalies = 0;

  if (kind == SeriesKind::finetunes) {
    std::map<std::string, std::vector<FineTuneEdge>> grouped;
    for (const std::string& b : extra_bases)
      grouped[b];
    for (FineTuneEdge& e : ds.load_edges())
      grouped[e.base_id].push_back(std::move(e));
    for (const auto& [base_id, edges] : grouped) {
      auto it = by_id.find(base_id);
      if (it == by_id.end())
        fail(ErrorKind::not_found, "base model '" + base_id + "' is not in the catalog");
      if (!include_early && is_early_model(*it->second, settings_.registry.early_cutoff_date)) {
        ++skipped;
        continue;
      }
      SeriesBuild build = build_adoption_series(*it->second, edges, bucket_length_days, as_of);
      excluded_edges += build.excluded_edges;
      ds.save_series({SeriesKind::finetunes, build.series});
      ++written;
    }
  } else {
    std::map<std::string, std::vector<DownloadSnapshot>> grouped;
    for (DownloadSnapshot& s : ds.load_snapshots())
      grouped[s.model_id].push_back(std::move(s));
    for (auto& [id, snaps] : grouped) {
      auto it = by_id.find(id);
      if (it == by_id.end() || snaps.size() < 2) {
        ++skipped;
        continue;
      }
      std::sort(snaps.begin(), snaps.end(),
                [](const DownloadSnapshot& a, const DownloadSnapshot& b) { return a.snapshot_date < b.snapshot_date; });
      DownloadSeriesBuild build = build_download_series(snaps, it->second->created_at);
      anomalies += build.anomalies.size();
      for (const CounterAnomaly& a : build.anomalies)
        os << "counter_anomaly," << id << ',' << format_date(a.date) << ',' << a.previous << ',' << a.observed
           << '\n';
      ds.save_series({SeriesKind::downloads, build.series});
      ++written;
    }
  }
  os << "series_written," << written << '\n'
     << "subjects_skipped," << skipped << '\n'
     << "edges_excluded," << excluded_edges << '\n'
     << "counter_anomalies," << anomalies << '\n';
  return os.str();
}

std::string Pipeline::fit(const std::optional<std::string>& subject, SeriesKind kind, const FitOptions& options)
{
  options.validate();
  Dataset ds(settings_.dataset_root);
  std::vector<SeriesRecord> series;
  if (subject) {
    for (SeriesRecord& r : ds.load_series(*subject))
      if (r.series_kind == kind)
        series.push_back(std::move(r));
    if (series.empty())
      fail(ErrorKind::not_found, "no " + std::string(to_string(kind)) + " series stored for '" + *subject + "'");
  } else {
    series = ds.load_all_series(kind);
  }

  std::ostringstream os;
  os << "subject_id,series_kind,status,lambda,mu,sigma,rmse_log,n_points\n";
  std::vector<FitRecord> fitted;
  for (const SeriesRecord& r : series) {
    FitResult result;
    try {
      result = fit_series(r.series, options);
    } catch (const Error& e) {
      if (subject || e.kind() != ErrorKind::insufficient_data)
        throw;
      os << r.series.subject_id << ',' << to_string(kind) << ",skipped_insufficient_data,,,,," << r.series.size()
         << '\n';
      continue;
    }
    fitted.push_back({r.series.subject_id, kind, result});
    os << r.series.subject_id << ',' << to_string(kind) << ',' << to_string(result.status) << ','
       << format_number(result.params.lambda) << ',' << format_number(result.params.mu) << ','
       << format_number(result.params.sigma) << ',' << format_number(result.rmse_log) << ',' << result.n_points
       << '\n';
  }
  ds.upsert_fits(fitted);
  return os.str();
}

std::string Pipeline::forecast(const std::string& subject, std::optional<SeriesKind> requested,
                               std::span<const double> targets, std::span<const double> horizons)
{
  Dataset ds(settings_.dataset_root);
  std::vector<FitRecord> fits = ds.load_fits();
  SeriesKind kind = requested.value_or(SeriesKind::finetunes);
  if (!requested) {
    bool has_downloads = std::any_of(fits.begin(), fits.end(), [&](const FitRecord& f) {
      return f.subject_id == subject && f.series_kind == SeriesKind::downloads;
    });
    if (has_downloads)
      kind = SeriesKind::downloads;
  }
  const FitRecord& record = find_fit(fits, subject, kind);

  double bucket_days = kind == SeriesKind::downloads ? 1.0 : 30.0;
  for (const SeriesRecord& r : ds.load_series(subject))
    if (r.series_kind == kind)
      bucket_days = r.series.bucket_length_days;

  ForecastReport report = forecast_report(record.result, targets, horizons);
  return forecast_csv(report, bucket_days);
}

std::string Pipeline::analyze_pareto(SeriesKind kind, double threshold, OutputFormat format)
{
  if (format == OutputFormat::svg)
    fail(ErrorKind::validation, "pareto output is available as csv or jsonl only");
  Dataset ds(settings_.dataset_root);
  std::vector<double> values;
  if (kind == SeriesKind::downloads) {
    for (const ModelMeta& m : ds.load_catalog())
      values.push_back(static_cast<double>(m.downloads_total));
  } else {
    std::map<std::string, double> per_base;
    for (const FineTuneEdge& e : ds.load_edges())
      per_base[e.base_id] += 1.0;
    for (const auto& [base, n] : per_base)
      values.push_back(n);
  }
  ParetoResult r = pareto_concentration(values, threshold);
  return render(pareto_csv(r, threshold), format);
}

std::string Pipeline::analyze_params(SeriesKind kind, const HistogramSpec& spec, OutputFormat format)
{
  Dataset ds(settings_.dataset_root);
  std::vector<FitRecord> fits = fits_of_kind(ds, kind);
  ParameterHistograms h = parameter_histograms(fits, spec);
  if (format == OutputFormat::svg)
    return histograms_svg(h);
  return render(histograms_csv(h), format);
}

std::string Pipeline::analyze_pairwise(SeriesKind kind, OutputFormat format)
{
  Dataset ds(settings_.dataset_root);
  std::vector<FitRecord> fits = fits_of_kind(ds, kind);
  PairwisePanels panels = pairwise_points(fits);
  if (format == OutputFormat::svg)
    return pairwise_svg(panels);
  return render(pairwise_csv(panels), format);
}

std::string Pipeline::analyze_org_density(SeriesKind kind, std::span<const std::size_t> horizons,
                                          double fitness_low, double fitness_high, std::size_t grid_size,
                                          OutputFormat format)
{
  Dataset ds(settings_.dataset_root);
  std::vector<FitRecord> fits = fits_of_kind(ds, kind);
  std::map<std::string, const FitRecord*> fit_by_subject;
  for (const FitRecord& f : fits)
    fit_by_subject.emplace(f.subject_id, &f);

  std::vector<DensitySubject> subjects;
  for (SeriesRecord& r : ds.load_all_series(kind)) {
    auto it = fit_by_subject.find(r.series.subject_id);
    if (it == fit_by_subject.end())
      continue;
    subjects.push_back({r.series.subject_id, organization_of(r.series.subject_id), it->second->result,
                        std::move(r.series.cumulative)});
  }

  std::vector<OrgDensityReport> reports;
  for (std::size_t h : horizons) {
    OrgDensityOptions opts;
    opts.horizon_buckets = h;
    opts.fitness_low = fitness_low;
    opts.fitness_high = fitness_high;
    opts.grid_size = grid_size;
    reports.push_back(org_density(subjects, opts));
  }
  if (format == OutputFormat::svg)
    return org_density_svg(reports);
  return render(org_density_csv(reports), format);
}

} // namespace adoptfit
