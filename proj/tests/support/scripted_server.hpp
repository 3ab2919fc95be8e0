#pragma once
//! Local HTTP server whose responses are decided by a test callback.

#include <httplib.h>

#include <functional>
#include <string>
#include <thread>

class ScriptedServer {
public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit ScriptedServer(Handler handler)
  {
    server_.Get(R"(/.*)", [handler](const httplib::Request& req, httplib::Response& res) { handler(req, res); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~ScriptedServer()
  {
    server_.stop();
    thread_.join();
  }
  ScriptedServer(const ScriptedServer&) = delete;
  ScriptedServer& operator=(const ScriptedServer&) = delete;

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};
