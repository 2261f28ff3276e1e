#include "lidarlabel/service/http_server.hpp"

#include <httplib.h>

namespace lidarlabel::service {

struct HttpServer::Impl {
  explicit Impl(AnnotationService& s) : service(s) {}
  AnnotationService& service;
  httplib::Server server;
};

HttpServer::HttpServer(AnnotationService& service) : impl_(std::make_unique<Impl>(service)) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    const Response r = impl_->service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  const char* any = R"(/.*)";
  impl_->server.Get(any, forward);
  impl_->server.Post(any, forward);
  impl_->server.Patch(any, forward);
  impl_->server.Delete(any, forward);
  impl_->server.Put(any, forward);
  impl_->server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

int HttpServer::bind_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace lidarlabel::service
