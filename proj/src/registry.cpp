#include "adoptfit/registry.hpp"

#include "adoptfit/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace adoptfit {

using json = nlohmann::json;

namespace {

ModelMeta record_from_json(const json& j)
{
  if (!j.is_object())
    fail(ErrorKind::validation, "registry record is not an object");
  std::string id;
  if (j.contains("id") && j["id"].is_string())
    id = j["id"].get<std::string>();
  else if (j.contains("modelId") && j["modelId"].is_string())
    id = j["modelId"].get<std::string>();
  else
    fail(ErrorKind::validation, "registry record has no id");

  if (!j.contains("createdAt") || !j["createdAt"].is_string())
    fail(ErrorKind::validation, "registry record '" + id + "' has no createdAt");
  Instant created = parse_instant(j["createdAt"].get<std::string>());

  std::uint64_t downloads = 0;
  if (j.contains("downloads")) {
    const json& d = j["downloads"];
    if (d.is_number_unsigned())
      downloads = d.get<std::uint64_t>();
    else if (d.is_number_integer() && d.get<std::int64_t>() >= 0)
      downloads = static_cast<std::uint64_t>(d.get<std::int64_t>());
    else
      fail(ErrorKind::validation, "registry record '" + id + "' has a bad downloads field");
  }

  std::vector<std::string> tags;
  if (j.contains("tags")) {
    if (!j["tags"].is_array())
      fail(ErrorKind::validation, "registry record '" + id + "' has non-array tags");
    for (const json& t : j["tags"])
      if (t.is_string())
        tags.push_back(t.get<std::string>());
  }
  return ModelMeta::make(std::move(id), created, downloads, std::move(tags));
}

} // namespace

ModelMeta parse_registry_record(const std::string& json_text)
{
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded())
    fail(ErrorKind::validation, "registry record is not valid JSON");
  return record_from_json(j);
}

std::optional<std::string> next_cursor_from_link(const std::string& link_header)
{
  // Link: <https://host/api/models?cursor=abc&limit=100>; rel="next", <...>; rel="prev"
  std::size_t pos = 0;
  while (pos < link_header.size()) {
    std::size_t open = link_header.find('<', pos);
    if (open == std::string::npos)
      break;
    std::size_t close = link_header.find('>', open);
    if (close == std::string::npos)
      break;
    std::size_t next_entry = link_header.find(',', close);
    std::string params = link_header.substr(close + 1, next_entry == std::string::npos ? std::string::npos
                                                                                         : next_entry - close - 1);
    if (params.find("rel=\"next\"") != std::string::npos || params.find("rel=next") != std::string::npos) {
      std::string url = link_header.substr(open + 1, close - open - 1);
      std::size_t q = url.find('?');
      if (q == std::string::npos)
        return std::nullopt;
      httplib::Params query;
      httplib::detail::parse_query_text(url.substr(q + 1), query);
      auto it = query.find("cursor");
      if (it == query.end() || it->second.empty())
        return std::nullopt;
      return it->second;
    }
    pos = next_entry == std::string::npos ? link_header.size() : next_entry + 1;
  }
  return std::nullopt;
}

RegistryClient::RegistryClient(RegistryConfig config, Sleeper sleeper)
  : config_(std::move(config))
  , sleeper_(std::move(sleeper))
{
  if (!sleeper_)
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (config_.page_size == 0)
    fail(ErrorKind::validation, "page_size must be positive");
  if (config_.max_parallel_fetches == 0)
    fail(ErrorKind::validation, "max_parallel_fetches must be positive");

  const std::string& url = config_.base_url;
  std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    fail(ErrorKind::validation, "registry base_url needs a scheme: " + url);
  std::size_t path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    path_prefix_ = url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/')
      path_prefix_.pop_back();
  }
}

std::string RegistryClient::get(const std::string& path, std::string* link_header)
{
  httplib::Headers headers;
  if (!config_.auth_token.empty())
    headers.emplace("Authorization", "Bearer " + config_.auth_token);

  std::string last_problem;
  for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
    ++attempts_;
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    client.set_follow_location(true);
    auto res = client.Get(path_prefix_ + path, headers);
    if (!res) {
      last_problem = "connection failed: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      if (link_header)
        *link_header = res->get_header_value("Link");
      return res->body;
    } else if (res->status == 429 || res->status >= 500) {
      last_problem = "HTTP " + std::to_string(res->status);
    } else if (res->status == 404) {
      fail(ErrorKind::not_found, "registry returned 404 for " + path);
    } else {
      fail(ErrorKind::permanent, "registry returned HTTP " + std::to_string(res->status) + " for " + path);
    }
    if (attempt < kMaxAttempts)
      sleeper_(kBaseBackoff * (1 << (attempt - 1)));
  }
  fail(ErrorKind::transient,
       "registry request " + path + " failed after " + std::to_string(kMaxAttempts) + " attempts (" + last_problem + ")");
}

ModelPage RegistryClient::fetch_page(const std::optional<std::string>& author,
                                     const std::optional<std::string>& cursor)
{
  httplib::Params params;
  if (author)
    params.emplace("author", *author);
  if (cursor)
    params.emplace("cursor", *cursor);
  params.emplace("limit", std::to_string(config_.page_size));

  std::string link;
  std::string body = get(httplib::append_query_params("/api/models", params), &link);

  json arr = json::parse(body, nullptr, false);
  if (arr.is_discarded() || !arr.is_array())
    fail(ErrorKind::permanent, "registry listing is not a JSON array");

  ModelPage page;
  for (const json& j : arr) {
    try {
      page.models.push_back(record_from_json(j));
    } catch (const Error&) {
      ++page.skipped;
    }
  }
  page.next_cursor = next_cursor_from_link(link);
  return page;
}

ModelPage RegistryClient::fetch_all(const std::optional<std::string>& author)
{
  ModelPage all;
  std::set<std::string> seen;
  std::set<std::string> cursors_seen;
  std::optional<std::string> cursor;
  while (true) {
    ModelPage page = fetch_page(author, cursor);
    all.skipped += page.skipped;
    for (ModelMeta& m : page.models)
      if (seen.insert(m.model_id).second)
        all.models.push_back(std::move(m));
    if (!page.next_cursor || !cursors_seen.insert(*page.next_cursor).second)
      break;
    cursor = page.next_cursor;
  }
  return all;
}

ModelMeta RegistryClient::fetch_model(const std::string& model_id)
{
  organization_of(model_id);
  std::string body = get("/api/models/" + model_id, nullptr);
  return parse_registry_record(body);
}

ModelBatch RegistryClient::fetch_models(std::span<const std::string> ids)
{
  std::vector<std::optional<ModelMeta>> found(ids.size());
  std::vector<std::string> errors(ids.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < ids.size(); i = next++) {
      try {
        found[i] = fetch_model(ids[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::size_t n_threads = std::min(config_.max_parallel_fetches, ids.size());
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n_threads; ++i)
    pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool)
    t.join();

  ModelBatch batch;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (found[i])
      batch.models.push_back(std::move(*found[i]));
    else
      batch.failed.emplace_back(ids[i], errors[i]);
  }
  return batch;
}

struct FixtureRegistry::Impl
{
  httplib::Server server;
  std::thread thread;
  int port = 0;
  json records = json::array();
  std::unordered_map<std::string, std::size_t> by_id;
};

FixtureRegistry::FixtureRegistry(const std::filesystem::path& directory)
  : impl_(std::make_unique<Impl>())
{
  std::filesystem::path file = directory / "models.json";
  std::ifstream in(file);
  if (!in)
    fail(ErrorKind::not_found, "fixture registry file not found: " + file.string());
  impl_->records = json::parse(in, nullptr, false);
  if (impl_->records.is_discarded() || !impl_->records.is_array())
    fail(ErrorKind::validation, "fixture registry file is not a JSON array: " + file.string());
  for (std::size_t i = 0; i < impl_->records.size(); ++i) {
    const json& r = impl_->records[i];
    if (r.is_object() && r.contains("id") && r["id"].is_string())
      impl_->by_id.emplace(r["id"].get<std::string>(), i);
  }

  Impl* impl = impl_.get();
  impl->server.Get("/api/models", [impl](const httplib::Request& req, httplib::Response& res) {
    std::string author = req.has_param("author") ? req.get_param_value("author") : "";
    std::size_t offset = req.has_param("cursor") ? std::stoul(req.get_param_value("cursor")) : 0;
    std::size_t limit = req.has_param("limit") ? std::stoul(req.get_param_value("limit")) : 100;
    if (limit == 0)
      limit = 100;

    json matching = json::array();
    for (const json& r : impl->records) {
      if (!author.empty()) {
        if (!r.is_object() || !r.contains("id") || !r["id"].is_string())
          continue;
        std::string id = r["id"].get<std::string>();
        if (id.rfind(author + "/", 0) != 0)
          continue;
      }
      matching.push_back(r);
    }
    json page = json::array();
    for (std::size_t i = offset; i < matching.size() && i < offset + limit; ++i)
      page.push_back(matching[i]);
    if (offset + limit < matching.size()) {
      httplib::Params next;
      if (!author.empty())
        next.emplace("author", author);
      next.emplace("cursor", std::to_string(offset + limit));
      next.emplace("limit", std::to_string(limit));
      res.set_header("Link", "<" + httplib::append_query_params("/api/models", next) + ">; rel=\"next\"");
    }
    res.set_content(page.dump(), "application/json");
  });
  impl->server.Get(R"(/api/models/(.+))", [impl](const httplib::Request& req, httplib::Response& res) {
    auto it = impl->by_id.find(req.matches[1].str());
    if (it == impl->by_id.end()) {
      res.status = 404;
      res.set_content(R"({"error":"not found"})", "application/json");
      return;
    }
    res.set_content(impl->records[it->second].dump(), "application/json");
  });

  impl->port = impl->server.bind_to_any_port("127.0.0.1");
  if (impl->port <= 0)
    fail(ErrorKind::io, "fixture registry could not bind a local port");
  impl->thread = std::thread([impl] { impl->server.listen_after_bind(); });
  impl->server.wait_until_ready();
}

FixtureRegistry::~FixtureRegistry()
{
  impl_->server.stop();
  if (impl_->thread.joinable())
    impl_->thread.join();
}

std::string FixtureRegistry::base_url() const
{
  return "http://127.0.0.1:" + std::to_string(impl_->port);
}

} // namespace adoptfit
