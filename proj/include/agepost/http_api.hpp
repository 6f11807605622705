#pragma once

// HTTP+JSON front end for AnnotationService. Routing is transport-neutral so
// the same dispatcher backs the socket server and in-process callers.

#include <map>
#include <memory>
#include <string>

#include "agepost/service.hpp"

namespace agepost {

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> params;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

int http_status_for(ErrorCode code);

// Routes:
//   POST /tasks                      {"query": {...}}
//   GET  /tasks[?status=open]
//   GET  /tasks/{id}
//   GET  /tasks/{id}/next
//   POST /tasks/{id}/comparisons     {"ref_id", "outcome", "annotator_id"}
//   POST /tasks/{id}/finalize        {"force": bool}
//   GET  /export[?include_discarded=true]   (JSON lines)
//   GET  /healthz
// Errors come back as {"error": <code name>, "detail": <text>}.
ApiResponse handle_request(AnnotationService& service, const ApiRequest& request);

class HttpServer {
 public:
  explicit HttpServer(AnnotationService& service);
  ~HttpServer();

  // Binds without serving; port 0 picks a free port. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called.
  bool serve();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace agepost
