#include "meltmap/http_server.hpp"

#include <cstdlib>
#include <regex>

#include <httplib.h>

#include "meltmap/equation_json.hpp"
#include "meltmap/error.hpp"

namespace meltmap::service {
namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::too_large: return 413;
    default: return 400;
  }
}

HttpResponse ok(const json& body) { return {200, canonical(body), "application/json"}; }

bool is_json(const std::string& content_type) {
  return content_type.rfind("application/json", 0) == 0;
}

json parse_body(const HttpRequest& request) {
  if (!is_json(request.content_type)) {
    fail(ErrorCode::validation_error, "expected content-type application/json");
  }
  try {
    return json::parse(request.body);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, std::string("malformed JSON body: ") + e.what());
  }
}

std::string field_or(const std::map<std::string, std::string>& parts, const json& body, const char* key,
                     std::string fallback) {
  if (const auto it = parts.find(key); it != parts.end()) return it->second;
  if (body.is_object() && body.contains(key)) {
    const auto& v = body.at(key);
    return v.is_string() ? v.get<std::string>() : v.dump();
  }
  return fallback;
}

}  // namespace

HttpResponse error_response(int status, std::string_view code, const std::string& message) {
  return {status, canonical({{"error", {{"code", code}, {"message", message}}}}), "application/json"};
}

HttpResponse ApiHandler::handle(const HttpRequest& request) const {
  static const std::regex equation_path(R"(^/equations/([A-Za-z0-9_\-]+)(/text)?$)");
  static const std::regex importance_path(R"(^/importance/([A-Za-z0-9_\-]+)$)");
  try {
    std::smatch m;
    if (request.method == "GET") {
      if (request.path == "/models") return get_models();
      if (std::regex_match(request.path, m, equation_path)) return get_equation(m[1], m[2].matched);
      if (std::regex_match(request.path, m, importance_path)) return get_importance(m[1]);
    } else if (request.method == "POST") {
      if (request.body.size() > kMaxBodyBytes) {
        return error_response(413, "too_large", "request body exceeds " + std::to_string(kMaxBodyBytes) + " bytes");
      }
      if (request.path == "/predict") return post_predict(request);
      if (request.path == "/sweep") return post_sweep(request);
      if (request.path == "/fit") return post_fit(request);
    }
    return error_response(404, "not_found", "no route for " + request.method + " " + request.path);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::validation_error && std::string_view(e.what()).starts_with("expected content-type")) {
      return error_response(415, "unsupported_media_type", e.what());
    }
    return error_response(status_for(e.code()), to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

HttpResponse ApiHandler::get_models() const { return ok(models_json(registry_)); }

HttpResponse ApiHandler::get_equation(const std::string& id, bool text_view) const {
  const auto eq = registry_.find(id);
  if (!text_view) return ok(equation_to_json(*eq));
  return ok({{"id", id},
             {"text", equation_to_string(*eq)},
             {"tabulated", equation_to_string(*eq, {4, CoefficientStyle::tabulated, false})}});
}

HttpResponse ApiHandler::get_importance(const std::string& id) const {
  auto body = to_json(feature_importance(*registry_.find(id)));
  body["id"] = id;
  return ok(body);
}

HttpResponse ApiHandler::post_predict(const HttpRequest& request) const {
  const auto body = parse_body(request);
  if (!body.is_object()) fail(ErrorCode::validation_error, "predict request must be an object");
  ModelSource source;
  if (body.contains("equation")) {
    source.equation = equation_from_json(body.at("equation"));
  } else if (body.contains("model_id") && body.at("model_id").is_string()) {
    source.id = body.at("model_id").get<std::string>();
  } else {
    fail(ErrorCode::validation_error, "predict request needs 'model_id' or 'equation'");
  }
  if (!body.contains("inputs")) fail(ErrorCode::validation_error, "predict request needs 'inputs'");
  return ok(to_json(predict(registry_, source, inputs_from_json(body.at("inputs")))));
}

HttpResponse ApiHandler::post_sweep(const HttpRequest& request) const {
  const auto grid = run_sweep(registry_, sweep_request_from_json(parse_body(request)));
  return ok(to_json(grid));
}

HttpResponse ApiHandler::post_fit(const HttpRequest& request) const {
  json body = json::object();
  std::string csv;
  if (request.content_type.rfind("multipart/form-data", 0) == 0) {
    const auto it = request.parts.find("csv");
    if (it == request.parts.end()) fail(ErrorCode::validation_error, "multipart upload needs a 'csv' part");
    csv = it->second;
  } else {
    body = parse_body(request);
    if (!body.is_object() || !body.contains("csv") || !body.at("csv").is_string()) {
      fail(ErrorCode::validation_error, "fit request needs a 'csv' string");
    }
    csv = body.at("csv").get<std::string>();
  }
  if (csv.size() > kMaxBodyBytes) fail(ErrorCode::too_large, "CSV exceeds the upload limit");

  FitRequest fit;
  fit.inputs = field_or(request.parts, body, "inputs", fit.inputs);
  fit.target = parse_field_or_throw(field_or(request.parts, body, "target", "depth"));
  const auto degree = field_or(request.parts, body, "degree", "auto");
  try {
    if (degree != "auto" && degree != "\"auto\"") fit.degree = static_cast<unsigned>(std::stoul(degree));
    fit.test_fraction = std::stod(field_or(request.parts, body, "split", std::to_string(kDefaultTestFraction)));
    fit.seed = std::stoull(field_or(request.parts, body, "seed", std::to_string(kDefaultSeed)));
  } catch (const std::logic_error&) {
    fail(ErrorCode::validation_error, "fit request: degree, split and seed must be numeric");
  }

  std::istringstream in(csv);
  const auto dataset = parse_csv(in, "upload");
  auto outcome = run_fit(dataset, fit);
  auto response = to_json(outcome);
  response["model_id"] = registry_.publish(outcome.equation);
  return ok(response);
}

ServerOptions resolve_server_options(std::optional<std::string> host_flag, std::optional<int> port_flag) {
  ServerOptions options;
  if (const char* env = std::getenv("MELTMAP_HOST"); env && *env) options.host = env;
  if (const char* env = std::getenv("MELTMAP_PORT"); env && *env) {
    try {
      options.port = std::stoi(env);
    } catch (const std::logic_error&) {
      fail(ErrorCode::contract_violation, std::string("MELTMAP_PORT is not a port number: ") + env);
    }
  }
  if (host_flag) options.host = *host_flag;
  if (port_flag) options.port = *port_flag;
  if (options.port < 0 || options.port > 65535) fail(ErrorCode::contract_violation, "port out of range");
  return options;
}

struct HttpServer::Impl {
  ServerOptions options;
  ApiHandler handler;
  httplib::Server server;
  int port = -1;

  Impl(ServerOptions o, ModelRegistry& registry) : options(std::move(o)), handler(registry) {
    server.set_payload_max_length(kMaxBodyBytes + 64 * 1024);
    auto adapt = [this](const httplib::Request& req, httplib::Response& res) {
      HttpRequest request{req.method, req.path, req.body, req.get_header_value("Content-Type"), {}};
      for (const auto& [name, part] : req.files) request.parts[name] = part.content;
      const auto response = handler.handle(request);
      res.status = response.status;
      res.set_content(response.body, response.content_type);
    };
    server.Get("/models", adapt);
    server.Get(R"(/equations/.*)", adapt);
    server.Get(R"(/importance/.*)", adapt);
    server.Post("/predict", adapt);
    server.Post("/sweep", adapt);
    server.Post("/fit", adapt);
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.status == 413) {
        res.set_content(error_response(413, "too_large", "request body too large").body, "application/json");
      }
    });
    if (options.ui_dir) {
      if (!server.set_mount_point("/", options.ui_dir->string())) {
        fail(ErrorCode::io_error, "UI directory not found: " + options.ui_dir->string());
      }
    }
  }
};

HttpServer::HttpServer(ServerOptions options, ModelRegistry& registry)
    : impl_(std::make_unique<Impl>(std::move(options), registry)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  if (impl_->options.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(impl_->options.host);
  } else if (impl_->server.bind_to_port(impl_->options.host, impl_->options.port)) {
    impl_->port = impl_->options.port;
  }
  if (impl_->port < 0) {
    fail(ErrorCode::io_error, "cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  }
  return impl_->port;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace meltmap::service
