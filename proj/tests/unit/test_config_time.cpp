#include "adoptfit/config.hpp"
#include "adoptfit/error.hpp"
#include "adoptfit/time.hpp"
#include "temp_dir.hpp"

#include <doctest.h>

#include <cstring>
#include <fstream>
#include <map>

using namespace adoptfit;

TEST_CASE("instants parse in several forms and print canonically")
{
  CHECK(format_instant(parse_instant("2024-02-05T15:00:00.000Z")) == "2024-02-05T15:00:00Z");
  CHECK(format_instant(parse_instant("2024-02-05T15:00:00+02:00")) == "2024-02-05T13:00:00Z");
  CHECK(format_instant(parse_instant("2024-02-05T15:00:00-01:30")) == "2024-02-05T16:30:00Z");
  CHECK(format_instant(parse_instant("2024-02-05")) == "2024-02-05T00:00:00Z");
  CHECK_THROWS_AS(parse_instant("2024-13-01"), Error);
  CHECK_THROWS_AS(parse_instant("yesterday"), Error);
  CHECK_THROWS_AS(parse_instant("2024-02-30T00:00:00Z"), Error);
  CHECK(format_date(parse_date("2024-02-29")) == "2024-02-29");
  CHECK_THROWS_AS(parse_date("2023-02-29"), Error);
  CHECK(days_between(parse_instant("2024-01-01T00:00:00Z"), parse_instant("2024-01-02T12:00:00Z")) == 1.5);
  CHECK(date_of(parse_instant("2024-01-01T23:59:59Z")) == parse_date("2024-01-01"));
}

TEST_CASE("settings precedence: file, then environment, then flags")
{
  TempDir dir;
  auto path = dir / "config.json";
  std::ofstream(path) << R"({"base_url":"http://from-file","auth_token":"file-token","page_size":50,
                            "dataset_root":"/data/file","early_cutoff_date":"2022-01-01"})";
  Settings s;
  apply_config_file(s, path);
  CHECK(s.registry.base_url == "http://from-file");
  CHECK(s.registry.page_size == 50);
  CHECK(s.registry.early_cutoff_date == parse_date("2022-01-01"));

  std::map<std::string, std::string> env{{"REGISTRY_URL", "http://from-env"}, {"DATASET_ROOT", "/data/env"}};
  apply_environment(s, [&](const char* key) -> const char* {
    auto it = env.find(key);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  CHECK(s.registry.base_url == "http://from-env");
  CHECK(s.registry.auth_token == "file-token");
  CHECK(s.dataset_root == "/data/env");

  set_option(s, "base_url", "http://from-flag");
  CHECK(s.registry.base_url == "http://from-flag");
}

TEST_CASE("bad settings are validation errors")
{
  Settings s;
  CHECK_THROWS_AS(set_option(s, "no_such_key", "1"), Error);
  CHECK_THROWS_AS(set_option(s, "page_size", "abc"), Error);
  CHECK_THROWS_AS(set_option(s, "page_size", "0"), Error);
  CHECK_THROWS_AS(set_option(s, "early_cutoff_date", "soon"), Error);
  TempDir dir;
  std::ofstream(dir / "bad.json") << "[1,2]";
  CHECK_THROWS_AS(apply_config_file(s, dir / "bad.json"), Error);
  std::ofstream(dir / "unknown.json") << R"({"colour":"blue"})";
  CHECK_THROWS_AS(apply_config_file(s, dir / "unknown.json"), Error);
  CHECK_THROWS_AS(apply_config_file(s, dir / "missing.json"), Error);
}
