#pragma once

// JSON-lines persistence. Every line is one object that starts with
// "schema" and "kind"; the remaining keys follow a fixed order per kind.
//
// Dataset layout under the root directory:
//   catalog.jsonl                    model records
//   edges.jsonl                      edge records
//   snapshots.jsonl                  snapshot records (append-only)
//   series/{org}__{name}.jsonl       series records, one line per series kind
//   fits.jsonl                       fit records

#include "adoptfit/records.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace adoptfit {

inline constexpr int kSchemaVersion = 1;

enum class RecordKind
{
  model,
  edge,
  snapshot,
  series,
  fit
};

std::string_view to_string(RecordKind kind);

using Record = std::variant<ModelMeta, FineTuneEdge, DownloadSnapshot, SeriesRecord, FitRecord>;

RecordKind kind_of(const Record& record);

//! One line of JSON, without the trailing newline.
std::string encode_record(const Record& record);
//! Throws Error(validation) if the line is malformed or of another kind.
Record decode_record(std::string_view line, RecordKind expected);

struct LineError
{
  std::size_t line = 0; // 1-based
  std::string message;
};

struct LoadReport
{
  std::vector<Record> records;
  std::vector<LineError> errors;
};

//! Writes one line per record through a temporary file and a rename, so the
//! target is either the old or the new content. Mixed kinds are rejected.
std::size_t save_records(const std::filesystem::path& path, std::span<const Record> records);

//! Throws Error(not_found) for a missing file and Error(validation) when more
//! than 10% of the non-blank lines are invalid.
LoadReport load_records(const std::filesystem::path& path, RecordKind expected);

//! Appends the snapshot unless (model_id, snapshot_date) is already logged.
//! Writers are serialized within the process and by an advisory file lock.
bool append_snapshot(const std::filesystem::path& path, const DownloadSnapshot& snapshot);

template <class T>
std::size_t save_typed(const std::filesystem::path& path, const std::vector<T>& items)
{
  std::vector<Record> records(items.begin(), items.end());
  return save_records(path, records);
}

template <class T>
std::vector<T> load_typed(const std::filesystem::path& path, RecordKind expected,
                          std::vector<LineError>* errors = nullptr)
{
  LoadReport report = load_records(path, expected);
  std::vector<T> out;
  out.reserve(report.records.size());
  for (Record& r : report.records)
    out.push_back(std::get<T>(std::move(r)));
  if (errors)
    *errors = std::move(report.errors);
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content);

class Dataset
{
public:
  explicit Dataset(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path catalog_path() const { return root_ / "catalog.jsonl"; }
  std::filesystem::path edges_path() const { return root_ / "edges.jsonl"; }
  std::filesystem::path snapshots_path() const { return root_ / "snapshots.jsonl"; }
  std::filesystem::path fits_path() const { return root_ / "fits.jsonl"; }
  std::filesystem::path series_path(std::string_view subject_id) const;

  std::vector<ModelMeta> load_catalog() const;
  std::vector<FineTuneEdge> load_edges() const;
  //! Empty when the log does not exist yet.
  std::vector<DownloadSnapshot> load_snapshots() const;
  //! Empty when no fits were written yet.
  std::vector<FitRecord> load_fits() const;
  std::vector<SeriesRecord> load_series(std::string_view subject_id) const;
  //! Every series of the given kind found under series/, ordered by subject id.
  std::vector<SeriesRecord> load_all_series(SeriesKind kind) const;

  //! Replaces the record of the same series kind, keeping the others.
  void save_series(const SeriesRecord& record) const;
  //! Replaces fits with the same (subject, kind) or appends new ones, in one rewrite.
  void upsert_fits(std::span<const FitRecord> records) const;

  //! Edges whose base or child is missing from the catalog.
  std::vector<FineTuneEdge> dangling_edges() const;

private:
  std::filesystem::path root_;
};

//! "org/name" -> "org__name".
std::string subject_file_stem(std::string_view subject_id);

} // namespace adoptfit
