#include "adoptfit/config.hpp"

#include "adoptfit/error.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>

namespace adoptfit {

namespace {

std::size_t parse_size(std::string_view key, std::string_view value)
{
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    fail(ErrorKind::validation, "option " + std::string(key) + " needs a nonnegative integer, got '" +
                                    std::string(value) + "'");
  return out;
}

} // namespace

void set_option(Settings& settings, std::string_view key, std::string_view value)
{
  RegistryConfig& r = settings.registry;
  if (key == "base_url") {
    r.base_url = value;
  } else if (key == "auth_token") {
    r.auth_token = value;
  } else if (key == "page_size") {
    r.page_size = parse_size(key, value);
    if (r.page_size == 0)
      fail(ErrorKind::validation, "page_size must be positive");
  } else if (key == "max_parallel_fetches") {
    r.max_parallel_fetches = parse_size(key, value);
    if (r.max_parallel_fetches == 0)
      fail(ErrorKind::validation, "max_parallel_fetches must be positive");
  } else if (key == "early_cutoff_date") {
    r.early_cutoff_date = parse_date(value);
  } else if (key == "name_match_min_length") {
    r.name_match_min_length = parse_size(key, value);
  } else if (key == "dataset_root") {
    settings.dataset_root = std::string(value);
  } else {
    fail(ErrorKind::validation, "unknown configuration key '" + std::string(key) + "'");
  }
}

void apply_config_file(Settings& settings, const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    fail(ErrorKind::not_found, "config file not found: " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    fail(ErrorKind::validation, "config file must hold a JSON object: " + path.string());
  for (auto it = j.begin(); it != j.end(); ++it) {
    const nlohmann::json& v = it.value();
    std::string text;
    if (v.is_string())
      text = v.get<std::string>();
    else if (v.is_number_unsigned())
      text = std::to_string(v.get<std::uint64_t>());
    else
      fail(ErrorKind::validation, "config key '" + it.key() + "' must be a string or a nonnegative integer");
    set_option(settings, it.key(), text);
  }
}

void apply_environment(Settings& settings, const EnvLookup& lookup)
{
  if (const char* v = lookup("REGISTRY_URL"); v && *v)
    set_option(settings, "base_url", v);
  if (const char* v = lookup("REGISTRY_TOKEN"); v && *v)
    set_option(settings, "auth_token", v);
  if (const char* v = lookup("DATASET_ROOT"); v && *v)
    set_option(settings, "dataset_root", v);
}

} // namespace adoptfit
