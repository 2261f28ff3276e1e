#pragma once

#include <memory>
#include <string>

#include "lidarlabel/service/annotation_service.hpp"

namespace lidarlabel::service {

// cpp-httplib front end; every route forwards to AnnotationService::handle.
class HttpServer {
 public:
  explicit HttpServer(AnnotationService& service);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Blocks until stop().
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and returns it, or -1. Call listen_after_bind() next.
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lidarlabel::service
