#include "adoptfit/store.hpp"

#include "adoptfit/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

namespace adoptfit {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string_view to_string(RecordKind kind)
{
  switch (kind) {
    case RecordKind::model: return "model";
    case RecordKind::edge: return "edge";
    case RecordKind::snapshot: return "snapshot";
    case RecordKind::series: return "series";
    case RecordKind::fit: return "fit";
  }
  return "model";
}

RecordKind kind_of(const Record& record)
{
  return static_cast<RecordKind>(record.index());
}

namespace {

ojson header(RecordKind kind)
{
  ojson j;
  j["schema"] = kSchemaVersion;
  j["kind"] = to_string(kind);
  return j;
}

// Integral counts are written as integers, anything else as a double.
ojson count_value(double v)
{
  if (v >= 0.0 && v <= 9007199254740992.0 && std::floor(v) == v)
    return static_cast<std::uint64_t>(v);
  return v;
}

ojson to_json(const ModelMeta& m)
{
  ojson j = header(RecordKind::model);
  j["model_id"] = m.model_id;
  j["organization"] = m.organization;
  j["created_at"] = format_instant(m.created_at);
  j["downloads_total"] = m.downloads_total;
  j["tags"] = m.tags;
  return j;
}

ojson to_json(const FineTuneEdge& e)
{
  ojson j = header(RecordKind::edge);
  j["base_id"] = e.base_id;
  j["child_id"] = e.child_id;
  j["detected_via"] = to_string(e.detected_via);
  j["child_created_at"] = format_instant(e.child_created_at);
  return j;
}

ojson to_json(const DownloadSnapshot& s)
{
  ojson j = header(RecordKind::snapshot);
  j["model_id"] = s.model_id;
  j["snapshot_date"] = format_date(s.snapshot_date);
  j["downloads_total"] = s.downloads_total;
  return j;
}

ojson to_json(const SeriesRecord& r)
{
  ojson j = header(RecordKind::series);
  j["subject_id"] = r.series.subject_id;
  j["series_kind"] = to_string(r.series_kind);
  j["release_instant"] = format_instant(r.series.release_instant);
  j["bucket_length_days"] = count_value(r.series.bucket_length_days);
  j["observation_offset_buckets"] = count_value(r.series.observation_offset_buckets);
  ojson values = ojson::array();
  for (double v : r.series.cumulative)
    values.push_back(count_value(v));
  j["cumulative"] = std::move(values);
  return j;
}

ojson to_json(const FitRecord& r)
{
  ojson j = header(RecordKind::fit);
  j["subject_id"] = r.subject_id;
  j["series_kind"] = to_string(r.series_kind);
  j["status"] = to_string(r.result.status);
  j["lambda"] = r.result.params.lambda;
  j["mu"] = r.result.params.mu;
  j["sigma"] = r.result.params.sigma;
  j["m"] = r.result.params.m;
  j["rmse_log"] = r.result.rmse_log;
  j["n_points"] = r.result.n_points;
  j["n_restarts_used"] = r.result.n_restarts_used;
  return j;
}

const ojson& field(const ojson& j, const char* key)
{
  auto it = j.find(key);
  if (it == j.end())
    fail(ErrorKind::validation, std::string("missing field '") + key + "'");
  return *it;
}

std::string str(const ojson& j, const char* key)
{
  const ojson& v = field(j, key);
  if (!v.is_string())
    fail(ErrorKind::validation, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

double num(const ojson& j, const char* key)
{
  const ojson& v = field(j, key);
  if (!v.is_number())
    fail(ErrorKind::validation, std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

std::uint64_t count(const ojson& j, const char* key)
{
  const ojson& v = field(j, key);
  if (v.is_number_unsigned())
    return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  fail(ErrorKind::validation, std::string("field '") + key + "' must be a nonnegative integer");
}

ModelMeta model_from(const ojson& j)
{
  std::vector<std::string> tags;
  const ojson& t = field(j, "tags");
  if (!t.is_array())
    fail(ErrorKind::validation, "field 'tags' must be an array");
  for (const ojson& s : t) {
    if (!s.is_string())
      fail(ErrorKind::validation, "tags must be strings");
    tags.push_back(s.get<std::string>());
  }
  ModelMeta m = ModelMeta::make(str(j, "model_id"), parse_instant(str(j, "created_at")), count(j, "downloads_total"),
                                std::move(tags));
  if (str(j, "organization") != m.organization)
    fail(ErrorKind::validation, "organization does not match model_id");
  return m;
}

FineTuneEdge edge_from(const ojson& j)
{
  FineTuneEdge e;
  e.base_id = str(j, "base_id");
  e.child_id = str(j, "child_id");
  e.detected_via = parse_edge_rule(str(j, "detected_via"));
  e.child_created_at = parse_instant(str(j, "child_created_at"));
  if (e.base_id == e.child_id)
    fail(ErrorKind::validation, "edge links a model to itself");
  return e;
}

DownloadSnapshot snapshot_from(const ojson& j)
{
  DownloadSnapshot s;
  s.model_id = str(j, "model_id");
  organization_of(s.model_id);
  s.snapshot_date = parse_date(str(j, "snapshot_date"));
  s.downloads_total = count(j, "downloads_total");
  return s;
}

SeriesRecord series_from(const ojson& j)
{
  SeriesRecord r;
  r.series_kind = parse_series_kind(str(j, "series_kind"));
  r.series.subject_id = str(j, "subject_id");
  r.series.release_instant = parse_instant(str(j, "release_instant"));
  r.series.bucket_length_days = num(j, "bucket_length_days");
  r.series.observation_offset_buckets = num(j, "observation_offset_buckets");
  const ojson& values = field(j, "cumulative");
  if (!values.is_array())
    fail(ErrorKind::validation, "field 'cumulative' must be an array");
  for (const ojson& v : values) {
    if (!v.is_number())
      fail(ErrorKind::validation, "cumulative values must be numbers");
    r.series.cumulative.push_back(v.get<double>());
  }
  r.series.validate();
  return r;
}

FitRecord fit_from(const ojson& j)
{
  FitRecord r;
  r.subject_id = str(j, "subject_id");
  r.series_kind = parse_series_kind(str(j, "series_kind"));
  r.result.status = parse_fit_status(str(j, "status"));
  r.result.params.lambda = num(j, "lambda");
  r.result.params.mu = num(j, "mu");
  r.result.params.sigma = num(j, "sigma");
  r.result.params.m = num(j, "m");
  r.result.params.validate();
  r.result.rmse_log = num(j, "rmse_log");
  r.result.n_points = count(j, "n_points");
  r.result.n_restarts_used = static_cast<int>(count(j, "n_restarts_used"));
  return r;
}

std::mutex& append_mutex()
{
  static std::mutex mu;
  return mu;
}

class FileDescriptor
{
public:
  explicit FileDescriptor(int fd) : fd_(fd) {}
  ~FileDescriptor()
  {
    if (fd_ >= 0)
      ::close(fd_);
  }
  FileDescriptor(const FileDescriptor&) = delete;
  FileDescriptor& operator=(const FileDescriptor&) = delete;
  int get() const { return fd_; }

private:
  int fd_;
};

void write_all(int fd, std::string_view data, const fs::path& path)
{
  const char* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR)
        continue;
      fail(ErrorKind::io, "write to " + path.string() + " failed: " + std::strerror(errno));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
}

} // namespace

std::string encode_record(const Record& record)
{
  return std::visit([](const auto& r) { return to_json(r).dump(); }, record);
}

Record decode_record(std::string_view line, RecordKind expected)
{
  ojson j = ojson::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    fail(ErrorKind::validation, "not a JSON object");
  const ojson& schema = field(j, "schema");
  if (!schema.is_number_integer() || schema.get<int>() != kSchemaVersion)
    fail(ErrorKind::validation, "unsupported schema version");
  std::string kind = str(j, "kind");
  if (kind != to_string(expected))
    fail(ErrorKind::validation, "expected a " + std::string(to_string(expected)) + " record, found '" + kind + "'");
  switch (expected) {
    case RecordKind::model: return model_from(j);
    case RecordKind::edge: return edge_from(j);
    case RecordKind::snapshot: return snapshot_from(j);
    case RecordKind::series: return series_from(j);
    case RecordKind::fit: return fit_from(j);
  }
  fail(ErrorKind::internal, "unhandled record kind");
}

void write_file_atomic(const fs::path& path, std::string_view content)
{
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec)
      fail(ErrorKind::io, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    FileDescriptor fd(::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644));
    if (fd.get() < 0)
      fail(ErrorKind::io, "cannot write " + tmp.string() + ": " + std::strerror(errno));
    try {
      write_all(fd.get(), content, tmp);
      if (::fsync(fd.get()) != 0)
        fail(ErrorKind::io, "fsync of " + tmp.string() + " failed: " + std::strerror(errno));
    } catch (...) {
      ::unlink(tmp.c_str());
      throw;
    }
  }
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    int err = errno;
    ::unlink(tmp.c_str());
    fail(ErrorKind::io, "cannot replace " + path.string() + ": " + std::strerror(err));
  }
}

std::size_t save_records(const fs::path& path, std::span<const Record> records)
{
  std::string content;
  for (const Record& r : records) {
    if (kind_of(r) != kind_of(records.front()))
      fail(ErrorKind::validation, "save_records got mixed record kinds (" + std::string(to_string(kind_of(records.front()))) +
                                      " and " + std::string(to_string(kind_of(r))) + ")");
    content += encode_record(r);
    content += '\n';
  }
  write_file_atomic(path, content);
  return records.size();
}

LoadReport load_records(const fs::path& path, RecordKind expected)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(ErrorKind::not_found, "no such file: " + path.string());

  LoadReport report;
  std::string line;
  std::size_t number = 0, nonblank = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos)
      continue;
    ++nonblank;
    try {
      report.records.push_back(decode_record(line, expected));
    } catch (const std::exception& e) {
      report.errors.push_back({number, e.what()});
    }
  }
  if (nonblank > 0 && report.errors.size() * 10 > nonblank)
    fail(ErrorKind::validation, path.string() + ": " + std::to_string(report.errors.size()) + " of " +
                                    std::to_string(nonblank) + " lines are not valid " +
                                    std::string(to_string(expected)) + " records (first at line " +
                                    std::to_string(report.errors.front().line) + ": " + report.errors.front().message +
                                    ")");
  return report;
}

bool append_snapshot(const fs::path& path, const DownloadSnapshot& snapshot)
{
  std::lock_guard<std::mutex> guard(append_mutex());
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());

  FileDescriptor fd(::open(path.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644));
  if (fd.get() < 0)
    fail(ErrorKind::io, "cannot open snapshot log " + path.string() + ": " + std::strerror(errno));
  if (::flock(fd.get(), LOCK_EX) != 0)
    fail(ErrorKind::io, "cannot lock snapshot log " + path.string() + ": " + std::strerror(errno));

  // Read the current content under the lock to check for the key.
  std::string existing;
  {
    char buf[65536];
    off_t offset = 0;
    while (true) {
      ssize_t n = ::pread(fd.get(), buf, sizeof buf, offset);
      if (n < 0) {
        if (errno == EINTR)
          continue;
        fail(ErrorKind::io, "cannot read snapshot log " + path.string() + ": " + std::strerror(errno));
      }
      if (n == 0)
        break;
      existing.append(buf, static_cast<std::size_t>(n));
      offset += n;
    }
  }
  std::istringstream lines(existing);
  std::string line;
  while (std::getline(lines, line)) {
    try {
      auto s = std::get<DownloadSnapshot>(decode_record(line, RecordKind::snapshot));
      if (s.model_id == snapshot.model_id && s.snapshot_date == snapshot.snapshot_date)
        return false;
    } catch (const Error&) {
      // unrelated or corrupt line
    }
  }

  std::string out;
  if (!existing.empty() && existing.back() != '\n')
    out += '\n';
  out += encode_record(snapshot);
  out += '\n';
  off_t original = static_cast<off_t>(existing.size());
  try {
    write_all(fd.get(), out, path);
    if (::fsync(fd.get()) != 0)
      fail(ErrorKind::io, "fsync of " + path.string() + " failed: " + std::strerror(errno));
  } catch (...) {
    // never leave a partial line behind
    if (::ftruncate(fd.get(), original) != 0) {
    }
    throw;
  }
  return true;
}

std::string subject_file_stem(std::string_view subject_id)
{
  std::string out;
  for (char c : subject_id) {
    if (c == '/')
      out += "__";
    else
      out += c;
  }
  return out;
}

Dataset::Dataset(fs::path root) : root_(std::move(root)) {}

fs::path Dataset::series_path(std::string_view subject_id) const
{
  return root_ / "series" / (subject_file_stem(subject_id) + ".jsonl");
}

std::vector<ModelMeta> Dataset::load_catalog() const
{
  return load_typed<ModelMeta>(catalog_path(), RecordKind::model);
}

std::vector<FineTuneEdge> Dataset::load_edges() const
{
  return load_typed<FineTuneEdge>(edges_path(), RecordKind::edge);
}

std::vector<DownloadSnapshot> Dataset::load_snapshots() const
{
  if (!fs::exists(snapshots_path()))
    return {};
  return load_typed<DownloadSnapshot>(snapshots_path(), RecordKind::snapshot);
}

std::vector<FitRecord> Dataset::load_fits() const
{
  if (!fs::exists(fits_path()))
    return {};
  return load_typed<FitRecord>(fits_path(), RecordKind::fit);
}

std::vector<SeriesRecord> Dataset::load_series(std::string_view subject_id) const
{
  return load_typed<SeriesRecord>(series_path(subject_id), RecordKind::series);
}

std::vector<SeriesRecord> Dataset::load_all_series(SeriesKind kind) const
{
  std::vector<SeriesRecord> out;
  fs::path dir = root_ / "series";
  if (!fs::exists(dir))
    return out;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const fs::path& f : files)
    for (SeriesRecord& r : load_typed<SeriesRecord>(f, RecordKind::series))
      if (r.series_kind == kind)
        out.push_back(std::move(r));
  std::sort(out.begin(), out.end(),
            [](const SeriesRecord& a, const SeriesRecord& b) { return a.series.subject_id < b.series.subject_id; });
  return out;
}

void Dataset::save_series(const SeriesRecord& record) const
{
  fs::path path = series_path(record.series.subject_id);
  std::vector<SeriesRecord> existing;
  if (fs::exists(path))
    existing = load_typed<SeriesRecord>(path, RecordKind::series);
  std::erase_if(existing, [&](const SeriesRecord& r) { return r.series_kind == record.series_kind; });
  existing.push_back(record);
  std::sort(existing.begin(), existing.end(),
            [](const SeriesRecord& a, const SeriesRecord& b) { return a.series_kind < b.series_kind; });
  save_typed(path, existing);
}

void Dataset::upsert_fits(std::span<const FitRecord> records) const
{
  std::vector<FitRecord> fits = load_fits();
  for (const FitRecord& record : records) {
    auto it = std::find_if(fits.begin(), fits.end(), [&](const FitRecord& f) {
      return f.subject_id == record.subject_id && f.series_kind == record.series_kind;
    });
    if (it != fits.end())
      *it = record;
    else
      fits.push_back(record);
  }
  save_typed(fits_path(), fits);
}

std::vector<FineTuneEdge> Dataset::dangling_edges() const
{
  std::set<std::string> ids;
  for (const ModelMeta& m : load_catalog())
    ids.insert(m.model_id);
  std::vector<FineTuneEdge> out;
  for (const FineTuneEdge& e : load_edges())
    if (!ids.count(e.base_id) || !ids.count(e.child_id))
      out.push_back(e);
  return out;
}

} // namespace adoptfit
