#pragma once

// Run settings. Sources apply in order file -> environment -> flags, each
// overriding the previous one.
//
// Config file: a JSON object with any of the keys
//   base_url, auth_token, page_size, max_parallel_fetches,
//   early_cutoff_date (YYYY-MM-DD), name_match_min_length, dataset_root
// Environment: REGISTRY_URL, REGISTRY_TOKEN, DATASET_ROOT

#include "adoptfit/registry.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace adoptfit {

struct Settings
{
  RegistryConfig registry;
  std::filesystem::path dataset_root = ".";
};

//! Sets one key from its textual value; throws Error(validation) for unknown
//! keys or unparsable values.
void set_option(Settings& settings, std::string_view key, std::string_view value);

void apply_config_file(Settings& settings, const std::filesystem::path& path);

using EnvLookup = std::function<const char*(const char*)>;
void apply_environment(Settings& settings, const EnvLookup& lookup);

} // namespace adoptfit
