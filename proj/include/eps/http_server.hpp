#pragma once

#include <string>
#include <thread>

#include "httplib.h"

#include "eps/errors.hpp"
#include "eps/service.hpp"

namespace eps {

// Binds a Service to cpp-httplib. All routing and policy live in Service;
// this layer only translates requests and responses.
class HttpServer {
 public:
  explicit HttpServer(Service& service) : service_(service) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) { serve(req, res); };
    server_.Get(".*", handler);
    server_.Post(".*", handler);
    // httplib's default also sets SO_REUSEPORT, which lets a second server
    // share a port silently; an occupied port must be a bind failure.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
  }

  ~HttpServer() {
    // httplib only releases the listening socket of a running server, so a
    // bound-but-idle one is started briefly to let stop() close it.
    if (port_ >= 0 && !thread_.joinable()) start_background();
    stop();
  }

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Throws ConfigError when the address cannot be bound.
  int bind(const std::string& host, int port) {
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
    } else {
      port_ = server_.bind_to_port(host, port) ? port : -1;
    }
    if (port_ < 0)
      throw ConfigError("cannot bind " + host + ":" + std::to_string(port) + " (address in use?)");
    return port_;
  }

  // Blocks until stop() is called.
  void run() { server_.listen_after_bind(); }

  void start_background() {
    thread_ = std::thread([this] { run(); });
    server_.wait_until_ready();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

 private:
  void serve(const httplib::Request& req, httplib::Response& res) {
    ApiRequest api;
    api.method = req.method;
    api.path = req.path;
    api.body = req.body;
    api.accept = req.get_header_value("Accept");
    auto auth = req.get_header_value("Authorization");
    if (auth.rfind("Bearer ", 0) == 0) api.token = auth.substr(7);
    for (const auto& [k, v] : req.params) api.query[k] = v;
    if (req.has_header("If-Match")) {
      try {
        api.expected_seq = std::stoull(req.get_header_value("If-Match"));
      } catch (const std::exception&) {
        res.status = 400;
        res.set_content(R"({"error":"SchemaError","message":"If-Match must be a sequence number"})",
                        "application/json");
        return;
      }
    }
    auto out = service_.handle(api);
    res.status = out.status;
    if (!out.session_state.empty()) res.set_header("X-Session-State", out.session_state);
    res.set_content(out.body, out.content_type);
  }

  Service& service_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace eps
