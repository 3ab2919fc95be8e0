#pragma once

// Client for a HuggingFace-style model registry:
//
//   GET {base_url}/api/models?author={org}&cursor={c}&limit={n}   -> JSON array
//   GET {base_url}/api/models/{org}/{name}                          -> JSON object
//
// Records carry "id", "createdAt" (RFC 3339), "downloads" and "tags". The next
// page is announced by a `Link: <...cursor=...>; rel="next"` header.

#include "adoptfit/records.hpp"
#include "adoptfit/time.hpp"

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace adoptfit {

struct RegistryConfig
{
  std::string base_url = "https://huggingface.co";
  std::string auth_token;
  std::size_t page_size = 100;
  std::size_t max_parallel_fetches = 4;
  Date early_cutoff_date = parse_date("2022-03-02");
  std::size_t name_match_min_length = 5;
};

//! Parses one registry record; throws Error(validation) when it is unusable.
ModelMeta parse_registry_record(const std::string& json_text);

struct ModelPage
{
  std::vector<ModelMeta> models;
  std::optional<std::string> next_cursor;
  std::size_t skipped = 0; // malformed records
};

struct ModelBatch
{
  std::vector<ModelMeta> models;                            // in request order
  std::vector<std::pair<std::string, std::string>> failed; // (id, message)
};

class RegistryClient
{
public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  static constexpr int kMaxAttempts = 5;
  static constexpr std::chrono::milliseconds kBaseBackoff{1000};

  explicit RegistryClient(RegistryConfig config, Sleeper sleeper = {});

  const RegistryConfig& config() const { return config_; }

  //! One page of the listing, optionally restricted to an author.
  ModelPage fetch_page(const std::optional<std::string>& author, const std::optional<std::string>& cursor);

  //! Follows cursors to the end; the union is de-duplicated by model id.
  ModelPage fetch_all(const std::optional<std::string>& author);

  ModelMeta fetch_model(const std::string& model_id);

  //! Fetches each id with at most max_parallel_fetches requests in flight.
  ModelBatch fetch_models(std::span<const std::string> ids);

  //! HTTP requests issued so far, retries included.
  std::size_t total_attempts() const { return attempts_.load(); }

private:
  std::string get(const std::string& path, std::string* link_header);

  RegistryConfig config_;
  Sleeper sleeper_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::atomic<std::size_t> attempts_{0};
};

//! Extracts the cursor query parameter from a rel="next" Link header.
std::optional<std::string> next_cursor_from_link(const std::string& link_header);

//! Local HTTP server that serves a registry fixture directory on 127.0.0.1.
//! The directory holds models.json, a JSON array of registry records.
class FixtureRegistry
{
public:
  explicit FixtureRegistry(const std::filesystem::path& directory);
  ~FixtureRegistry();

  FixtureRegistry(const FixtureRegistry&) = delete;
  FixtureRegistry& operator=(const FixtureRegistry&) = delete;

  std::string base_url() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace adoptfit
