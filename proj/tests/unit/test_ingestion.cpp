#include "adoptfit/error.hpp"
#include "adoptfit/ingestion.hpp"
#include "adoptfit/registry.hpp"
#include "adoptfit/store.hpp"
#include "oracles.hpp"
#include "scripted_server.hpp"
#include "temp_dir.hpp"

#include <doctest.h>

#include <json.hpp>

#include <atomic>
#include <fstream>
#include <mutex>
#include <random>
#include <set>

using namespace adoptfit;
using namespace std::chrono;

namespace {

Instant at(const char* text) { return parse_instant(text); }

void write_models(const std::filesystem::path& dir, const nlohmann::json& records)
{
  std::ofstream(dir / "models.json") << records.dump();
}

nlohmann::json model_json(const std::string& id, const std::string& created, std::uint64_t downloads = 0,
                          std::vector<std::string> tags = {})
{
  return {{"id", id}, {"createdAt", created}, {"downloads", downloads}, {"tags", tags}};
}

RegistryConfig config_for(const std::string& url)
{
  RegistryConfig c;
  c.base_url = url;
  return c;
}

} // namespace

TEST_CASE("registry record parsing")
{
  ModelMeta m = parse_registry_record(
      R"({"id":"qwen/Qwen1.5-0.5B","createdAt":"2024-02-05T15:00:00.000Z","downloads":12,"tags":["a"]})");
  CHECK(m.model_id == "qwen/Qwen1.5-0.5B");
  CHECK(m.organization == "qwen");
  CHECK(m.downloads_total == 12);
  CHECK(format_instant(m.created_at) == "2024-02-05T15:00:00Z");
  CHECK(m.tags == std::vector<std::string>{"a"});
  CHECK(parse_registry_record(R"({"modelId":"a/b","createdAt":"2024-01-01"})").model_id == "a/b");
  CHECK_THROWS_AS(parse_registry_record("{"), Error);
  CHECK_THROWS_AS(parse_registry_record(R"({"id":"nobody","createdAt":"2024-01-01"})"), Error);
  CHECK_THROWS_AS(parse_registry_record(R"({"id":"a/b"})"), Error);
}

TEST_CASE("link header cursor")
{
  CHECK(next_cursor_from_link(R"(<https://h/api/models?cursor=abc&limit=5>; rel="next")") == "abc");
  CHECK(next_cursor_from_link(R"(<https://h/api/models?cursor=p>; rel="prev", <https://h/x?cursor=n>; rel="next")") ==
        "n");
  CHECK_FALSE(next_cursor_from_link("").has_value());
  CHECK_FALSE(next_cursor_from_link(R"(<https://h/api/models?cursor=abc>; rel="prev")").has_value());
}

TEST_CASE("organization listing through the fixture registry")
{
  TempDir dir;
  write_models(dir.path(), {model_json("qwen/a", "2024-01-01T00:00:00Z"), model_json("qwen/b", "2024-01-02T00:00:00Z"),
                            model_json("other/c", "2024-01-03T00:00:00Z"), model_json("qwen/d", "2024-01-04T00:00:00Z"),
                            {{"id", "qwen/broken"}}});
  FixtureRegistry fixture(dir.path());
  RegistryClient client(config_for(fixture.base_url()));
  ModelPage page = client.fetch_all(std::string("qwen"));
  REQUIRE(page.models.size() == 3);
  for (const ModelMeta& m : page.models)
    CHECK(m.organization == "qwen");
  CHECK(page.skipped == 1);
}

TEST_CASE("pagination follows the next cursor and the union has no duplicates")
{
  TempDir dir;
  nlohmann::json records = nlohmann::json::array();
  for (int i = 0; i < 7; ++i)
    records.push_back(model_json("org/m" + std::to_string(i), "2024-01-01T00:00:00Z"));
  write_models(dir.path(), records);
  FixtureRegistry fixture(dir.path());
  RegistryConfig cfg = config_for(fixture.base_url());
  cfg.page_size = 3;
  RegistryClient client(cfg);

  ModelPage first = client.fetch_page(std::nullopt, std::nullopt);
  CHECK(first.models.size() == 3);
  REQUIRE(first.next_cursor.has_value());
  ModelPage second = client.fetch_page(std::nullopt, first.next_cursor);
  CHECK(second.models.size() == 3);

  ModelPage all = client.fetch_all(std::nullopt);
  std::set<std::string> ids;
  for (const ModelMeta& m : all.models)
    ids.insert(m.model_id);
  CHECK(all.models.size() == 7);
  CHECK(ids.size() == 7);
}

TEST_CASE("a page repeated by the server is not duplicated")
{
  ScriptedServer server([](const httplib::Request& req, httplib::Response& res) {
    std::string cursor = req.has_param("cursor") ? req.get_param_value("cursor") : "";
    nlohmann::json page = nlohmann::json::array();
    if (cursor.empty()) {
      page.push_back(model_json("o/a", "2024-01-01"));
      page.push_back(model_json("o/b", "2024-01-01"));
      res.set_header("Link", "</api/models?cursor=2>; rel=\"next\"");
    } else {
      page.push_back(model_json("o/b", "2024-01-01"));
      page.push_back(model_json("o/c", "2024-01-01"));
      res.set_header("Link", "</api/models?cursor=2>; rel=\"next\"");
    }
    res.set_content(page.dump(), "application/json");
  });
  RegistryClient client(config_for(server.url()));
  ModelPage all = client.fetch_all(std::nullopt);
  CHECK(all.models.size() == 3);
}

TEST_CASE("429 twice then success takes three attempts with exponential backoff")
{
  std::atomic<int> calls{0};
  ScriptedServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++calls <= 2) {
      res.status = 429;
      return;
    }
    res.set_content(model_json("qwen/x", "2024-01-01T00:00:00Z").dump(), "application/json");
  });
  std::vector<milliseconds> sleeps;
  RegistryClient client(config_for(server.url()), [&](milliseconds d) { sleeps.push_back(d); });
  ModelMeta m = client.fetch_model("qwen/x");
  CHECK(m.model_id == "qwen/x");
  CHECK(client.total_attempts() == 3);
  CHECK(sleeps == std::vector<milliseconds>{1000ms, 2000ms});
}

TEST_CASE("persistent 5xx becomes a transient error after five attempts")
{
  ScriptedServer server([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  std::vector<milliseconds> sleeps;
  RegistryClient client(config_for(server.url()), [&](milliseconds d) { sleeps.push_back(d); });
  try {
    client.fetch_model("a/b");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::transient);
  }
  CHECK(client.total_attempts() == 5);
  CHECK(sleeps == std::vector<milliseconds>{1000ms, 2000ms, 4000ms, 8000ms});
}

TEST_CASE("4xx other than 429 is permanent without retry")
{
  ScriptedServer server([](const httplib::Request&, httplib::Response& res) { res.status = 403; });
  RegistryClient client(config_for(server.url()), [](milliseconds) {});
  try {
    client.fetch_model("a/b");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::permanent);
  }
  CHECK(client.total_attempts() == 1);
}

TEST_CASE("unreachable host is transient")
{
  RegistryClient client(config_for("http://127.0.0.1:1"), [](milliseconds) {});
  try {
    client.fetch_model("a/b");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::transient);
  }
  CHECK(client.total_attempts() == 5);
}

TEST_CASE("auth token is sent as a bearer header")
{
  std::string seen;
  std::mutex mu;
  ScriptedServer server([&](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mu);
    seen = req.get_header_value("Authorization");
    res.set_content(model_json("a/b", "2024-01-01").dump(), "application/json");
  });
  RegistryConfig cfg = config_for(server.url());
  cfg.auth_token = "s3cret";
  RegistryClient client(cfg);
  client.fetch_model("a/b");
  CHECK(seen == "Bearer s3cret");
}

TEST_CASE("resolve fine-tunes by tag and by name")
{
  std::vector<ModelMeta> catalog{
      ModelMeta::make("meta-llama/Llama-2-7b", at("2023-07-18T00:00:00Z")),
      ModelMeta::make("someone/tagged", at("2023-08-01T00:00:00Z"), 0, {"base_model:finetune:meta-llama/Llama-2-7b"}),
      ModelMeta::make("org/llama-2-7b-lora-v3", at("2023-09-01T00:00:00Z")),
      ModelMeta::make("org/Llama-2-7b-prequel", at("2023-07-01T00:00:00Z")),
      ModelMeta::make("other/unrelated", at("2023-09-01T00:00:00Z")),
  };
  auto edges = resolve_fine_tunes("meta-llama/Llama-2-7b", catalog);
  REQUIRE(edges.size() == 2);
  std::map<std::string, EdgeRule> by_child;
  for (const auto& e : edges) {
    CHECK(e.base_id == "meta-llama/Llama-2-7b");
    by_child[e.child_id] = e.detected_via;
  }
  CHECK(by_child.at("someone/tagged") == EdgeRule::tag_exact);
  CHECK(by_child.at("org/llama-2-7b-lora-v3") == EdgeRule::name_substring);
  CHECK_FALSE(by_child.contains("org/Llama-2-7b-prequel"));
  CHECK_THROWS_AS(resolve_fine_tunes("nobody/here", catalog), Error);
}

TEST_CASE("short base names never match by substring")
{
  std::vector<ModelMeta> catalog{
      ModelMeta::make("facebook/opt", at("2022-05-01T00:00:00Z")),
      ModelMeta::make("x/adopt-things", at("2023-01-01T00:00:00Z")),
      ModelMeta::make("x/tuned", at("2023-01-01T00:00:00Z"), 0, {"base_model:facebook/opt"}),
  };
  auto edges = resolve_fine_tunes("facebook/opt", catalog);
  REQUIRE(edges.size() == 1);
  CHECK(edges[0].child_id == "x/tuned");
}

TEST_CASE("adoption series from edges")
{
  ModelMeta base = ModelMeta::make("meta-llama/Llama-2-7b", at("2023-07-18T00:00:00Z"));
  auto edge_at = [&](double days) {
    return FineTuneEdge{base.model_id, "c/" + std::to_string(days), EdgeRule::tag_exact,
                        base.created_at + seconds(static_cast<long>(days * 86400))};
  };

  std::vector<FineTuneEdge> two{edge_at(2), edge_at(33)};
  SeriesBuild b = build_adoption_series(base, two, 30);
  CHECK(b.series.cumulative == std::vector<double>{1, 2});
  CHECK(b.series.subject_id == base.model_id);
  CHECK(b.series.release_instant == base.created_at);

  CHECK(build_adoption_series(base, {}, 30).series.cumulative == std::vector<double>{0});

  std::vector<FineTuneEdge> five;
  for (int i = 0; i < 5; ++i)
    five.push_back(edge_at(i * 5 + 1));
  CHECK(build_adoption_series(base, five, 30).series.cumulative == std::vector<double>{5});

  std::vector<FineTuneEdge> with_early{edge_at(2), edge_at(-5)};
  SeriesBuild e = build_adoption_series(base, with_early, 30);
  CHECK(e.excluded_edges == 1);
  CHECK(e.series.cumulative == std::vector<double>{1});

  SeriesBuild through = build_adoption_series(base, two, 30, base.created_at + days(95));
  CHECK(through.series.cumulative == std::vector<double>{1, 2, 2, 2});
}

TEST_CASE("adoption series matches direct counting on random ages")
{
  ModelMeta base = ModelMeta::make("o/base-model", at("2024-01-01T12:00:00Z"));
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<long> secs(0, 400L * 86400);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<FineTuneEdge> edges;
    std::vector<double> ages;
    for (int i = 0; i < 50; ++i) {
      long s = secs(rng);
      edges.push_back({base.model_id, "c/" + std::to_string(i), EdgeRule::tag_exact, base.created_at + seconds(s)});
      ages.push_back(s / 86400.0);
    }
    double bucket = trial % 2 ? 30 : 7;
    SeriesBuild b = build_adoption_series(base, edges, bucket);
    CHECK(b.series.cumulative == oracle::bucket_counts(ages, bucket, b.series.size()));
  }
}

TEST_CASE("download series examples")
{
  Instant release = at("2024-01-01T09:30:00Z");
  Date day0 = date_of(release);
  auto snap = [&](int day, std::uint64_t n) { return DownloadSnapshot{"o/m", day0 + days(day), n}; };

  std::vector<DownloadSnapshot> basic{snap(20, 1000), snap(21, 1500)};
  DownloadSeriesBuild b = build_download_series(basic, release);
  CHECK(b.series.observation_offset_buckets == 20);
  CHECK(b.series.bucket_length_days == 1);
  CHECK(b.series.cumulative == std::vector<double>{1000, 1500});
  CHECK(b.anomalies.empty());

  std::vector<DownloadSnapshot> gap{snap(20, 1000), snap(22, 1800)};
  CHECK(build_download_series(gap, release).series.cumulative == std::vector<double>{1000, 1000, 1800});

  std::vector<DownloadSnapshot> reset{snap(20, 1000), snap(21, 900)};
  DownloadSeriesBuild r = build_download_series(reset, release);
  CHECK(r.series.cumulative == std::vector<double>{1000, 1000});
  REQUIRE(r.anomalies.size() == 1);
  CHECK(r.anomalies[0].previous == 1000);
  CHECK(r.anomalies[0].observed == 900);
  CHECK(r.anomalies[0].date == day0 + days(21));

  std::vector<DownloadSnapshot> one{snap(20, 1000)};
  CHECK_THROWS_AS(build_download_series(one, release), Error);
  std::vector<DownloadSnapshot> unsorted{snap(21, 1000), snap(20, 1000)};
  CHECK_THROWS_AS(build_download_series(unsorted, release), Error);
  std::vector<DownloadSnapshot> mixed{snap(20, 1000), DownloadSnapshot{"o/other", day0 + days(21), 5}};
  CHECK_THROWS_AS(build_download_series(mixed, release), Error);
}

TEST_CASE("early models")
{
  Date cutoff = parse_date("2022-03-02");
  CHECK(is_early_model(ModelMeta::make("a/b", at("2021-05-01T00:00:00Z")), cutoff));
  CHECK_FALSE(is_early_model(ModelMeta::make("a/b", at("2022-03-02T00:00:00Z")), cutoff));
}

TEST_CASE("daily snapshot appends once per id and date and reports failures")
{
  TempDir dir;
  write_models(dir.path(), {model_json("o/a", "2024-01-01", 10), model_json("o/b", "2024-01-01", 20),
                            model_json("o/c", "2024-01-01", 30)});
  FixtureRegistry fixture(dir.path());
  RegistryClient client(config_for(fixture.base_url()), [](milliseconds) {});
  std::string log = (dir / "snapshots.jsonl").string();
  Date date = parse_date("2024-06-01");

  std::vector<std::string> ids{"o/a", "o/b", "o/c"};
  SnapshotReport first = record_download_snapshot(client, ids, date, log);
  CHECK(first.appended == 3);
  CHECK(first.failed.empty());
  SnapshotReport again = record_download_snapshot(client, ids, date, log);
  CHECK(again.appended == 0);
  CHECK(again.already_present == 3);

  std::vector<std::string> with_missing{"o/a", "o/missing", "o/c"};
  SnapshotReport partial = record_download_snapshot(client, with_missing, parse_date("2024-06-02"), log);
  CHECK(partial.appended == 2);
  REQUIRE(partial.failed.size() == 1);
  CHECK(partial.failed[0].first == "o/missing");

  auto snaps = load_typed<DownloadSnapshot>(log, RecordKind::snapshot);
  CHECK(snaps.size() == 5);
  CHECK(snaps[0].downloads_total == 10);
}

TEST_CASE("parallel fetch keeps request order")
{
  TempDir dir;
  nlohmann::json records = nlohmann::json::array();
  std::vector<std::string> ids;
  for (int i = 0; i < 12; ++i) {
    ids.push_back("o/m" + std::to_string(i));
    records.push_back(model_json(ids.back(), "2024-01-01", i));
  }
  write_models(dir.path(), records);
  FixtureRegistry fixture(dir.path());
  RegistryConfig cfg = config_for(fixture.base_url());
  cfg.max_parallel_fetches = 4;
  RegistryClient client(cfg);
  ModelBatch batch = client.fetch_models(ids);
  REQUIRE(batch.models.size() == 12);
  for (int i = 0; i < 12; ++i)
    CHECK(batch.models[i].model_id == ids[i]);
}
