#include <httplib.h>

#include "revdec/error.hpp"
#include "revdec/service.hpp"

namespace revdec::service {

struct HttpServer::Impl {
  std::shared_ptr<Api> api;
  httplib::Server server;
};

namespace {

void reply(httplib::Response& res, const HttpResult& r) {
  res.status = r.status;
  res.set_content(r.body, "application/json");
}

}  // namespace

HttpServer::HttpServer(std::shared_ptr<Api> api) : impl_(std::make_unique<Impl>()) {
  impl_->api = std::move(api);
  Api& a = *impl_->api;
  auto& s = impl_->server;
  s.Post("/api/v1/score",
         [&a](const httplib::Request& req, httplib::Response& res) { reply(res, a.score(req.body)); });
  s.Post("/api/v1/business/analyze", [&a](const httplib::Request& req, httplib::Response& res) {
    reply(res, a.analyze(req.body));
  });
  s.Get("/api/v1/models",
        [&a](const httplib::Request&, httplib::Response& res) { reply(res, a.models()); });
  s.Get("/healthz",
        [&a](const httplib::Request&, httplib::Response& res) { reply(res, a.health()); });
  // Browser clients may be served from another origin.
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  s.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace revdec::service
