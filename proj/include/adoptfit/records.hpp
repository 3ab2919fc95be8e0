#pragma once

#include "adoptfit/fitter.hpp"
#include "adoptfit/time.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace adoptfit {

//! Registry metadata for one model. model_id is "org/name".
struct ModelMeta
{
  std::string model_id;
  std::string organization;
  Instant created_at{};
  std::uint64_t downloads_total = 0;
  std::vector<std::string> tags;

  //! Builds a record, deriving the organization from the id.
  static ModelMeta make(std::string model_id, Instant created_at, std::uint64_t downloads_total = 0,
                        std::vector<std::string> tags = {});

  void validate() const;
  std::string_view bare_name() const;

  friend bool operator==(const ModelMeta&, const ModelMeta&) = default;
};

enum class EdgeRule
{
  tag_exact,
  name_substring
};

std::string_view to_string(EdgeRule rule);
EdgeRule parse_edge_rule(std::string_view text);

struct FineTuneEdge
{
  std::string base_id;
  std::string child_id;
  EdgeRule detected_via = EdgeRule::tag_exact;
  Instant child_created_at{};

  friend bool operator==(const FineTuneEdge&, const FineTuneEdge&) = default;
};

struct DownloadSnapshot
{
  std::string model_id;
  Date snapshot_date{};
  std::uint64_t downloads_total = 0;

  friend bool operator==(const DownloadSnapshot&, const DownloadSnapshot&) = default;
};

enum class SeriesKind
{
  finetunes,
  downloads
};

std::string_view to_string(SeriesKind kind);
SeriesKind parse_series_kind(std::string_view text);

struct SeriesRecord
{
  SeriesKind series_kind = SeriesKind::finetunes;
  AdoptionSeries series;

  friend bool operator==(const SeriesRecord&, const SeriesRecord&) = default;
};

struct FitRecord
{
  std::string subject_id;
  SeriesKind series_kind = SeriesKind::finetunes;
  FitResult result;

  friend bool operator==(const FitRecord&, const FitRecord&) = default;
};

//! Organization part of "org/name"; throws Error(validation) unless the id
//! contains exactly one '/' with nonempty halves.
std::string organization_of(std::string_view model_id);

} // namespace adoptfit
