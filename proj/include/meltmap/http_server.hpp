#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "meltmap/service.hpp"

namespace meltmap::service {

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

struct HttpRequest {
  std::string method;
  std::string path;
  std::string body;
  std::string content_type;
  // Multipart parts by name (file contents or plain fields).
  std::map<std::string, std::string> parts;
};

inline constexpr std::size_t kMaxBodyBytes = 8 * 1024 * 1024;

// Transport-independent router for the JSON API.
class ApiHandler {
 public:
  explicit ApiHandler(ModelRegistry& registry) : registry_(registry) {}

  HttpResponse handle(const HttpRequest& request) const;

 private:
  HttpResponse get_models() const;
  HttpResponse get_equation(const std::string& id, bool text_view) const;
  HttpResponse get_importance(const std::string& id) const;
  HttpResponse post_predict(const HttpRequest& request) const;
  HttpResponse post_sweep(const HttpRequest& request) const;
  HttpResponse post_fit(const HttpRequest& request) const;

  ModelRegistry& registry_;
};

HttpResponse error_response(int status, std::string_view code, const std::string& message);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> ui_dir;
};

// Flags win over MELTMAP_HOST / MELTMAP_PORT, which win over the defaults.
ServerOptions resolve_server_options(std::optional<std::string> host_flag, std::optional<int> port_flag);

class HttpServer {
 public:
  HttpServer(ServerOptions options, ModelRegistry& registry);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds (port 0 picks a free port) and returns the bound port.
  int bind();
  // Blocks until stop() is called.
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace meltmap::service
