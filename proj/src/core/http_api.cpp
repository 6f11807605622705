#include "agepost/http_api.hpp"

#include <httplib.h>

#include <regex>

namespace agepost {

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::DataError:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::LengthMismatch:
      return 400;
    case ErrorCode::UnknownTask:
      return 404;
    case ErrorCode::DuplicateQuery:
    case ErrorCode::TaskClosed:
    case ErrorCode::OutOfOrderReference:
    case ErrorCode::QueueNotExhausted:
      return 409;
    case ErrorCode::UnknownReference:
    case ErrorCode::InsufficientPool:
    case ErrorCode::NoEvidence:
    case ErrorCode::DegenerateEvidence:
    case ErrorCode::EmptySupport:
    case ErrorCode::FitDiverged:
    case ErrorCode::NonFiniteLoss:
      return 422;
    case ErrorCode::IoError:
      return 500;
  }
  return 500;
}

namespace {

ApiResponse json_response(int status, const Json& body) {
  return {status, "application/json", body.dump()};
}

ApiResponse error_response(int status, std::string_view code, const std::string& detail) {
  return json_response(status, {{"error", code}, {"detail", detail}});
}

Json parse_body(const std::string& body) {
  if (body.empty()) return Json::object();
  try {
    Json j = Json::parse(body);
    if (!j.is_object()) fail(ErrorCode::InvalidArgument, "request body must be a JSON object");
    return j;
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::InvalidArgument, std::string("malformed JSON body: ") + e.what());
  }
}

bool truthy(const std::map<std::string, std::string>& params, const std::string& key) {
  const auto it = params.find(key);
  return it != params.end() && (it->second == "true" || it->second == "1");
}

Json task_view(AnnotationService& service, const AnnotationTask& task) {
  Json j = task_to_json(task);
  const auto s = service.summary(task.task_id);
  j["posterior"] = distribution_to_json(s.posterior);
  j["mode"] = s.mode;
  j["ci90"] = {s.ci90.lo, s.ci90.hi};
  j["ci90_width"] = s.ci90.width();
  j["remaining"] = task.remaining();
  Json pending = Json::array();
  for (std::size_t i = task.events.size(); i < task.references.size(); ++i) {
    pending.push_back(reference_to_json(task.references[i]));
  }
  j["pending_refs"] = std::move(pending);
  return j;
}

ApiResponse dispatch(AnnotationService& service, const ApiRequest& req) {
  static const std::regex task_re(R"(^/tasks/([^/]+)$)");
  static const std::regex next_re(R"(^/tasks/([^/]+)/next$)");
  static const std::regex cmp_re(R"(^/tasks/([^/]+)/comparisons$)");
  static const std::regex fin_re(R"(^/tasks/([^/]+)/finalize$)");
  std::smatch m;
  const std::string& path = req.path;

  if (path == "/healthz" && req.method == "GET") {
    return json_response(200, {{"status", "ok"},
                               {"tasks", service.task_count()},
                               {"seq", service.last_seq()}});
  }
  if (path == "/tasks") {
    if (req.method == "POST") {
      const Json body = parse_body(req.body);
      const Json& q = body.contains("query") ? body.at("query") : body;
      const auto task = service.create_task(query_from_json(q));
      return json_response(201, task_view(service, task));
    }
    if (req.method == "GET") {
      std::optional<TaskStatus> status;
      if (auto it = req.params.find("status"); it != req.params.end()) {
        if (it->second == "open") status = TaskStatus::Open;
        else if (it->second == "finalized") status = TaskStatus::Finalized;
        else if (it->second == "discarded") status = TaskStatus::Discarded;
        else fail(ErrorCode::InvalidArgument, "unknown status filter " + it->second);
      }
      Json list = Json::array();
      for (const auto& t : service.list_tasks(status)) {
        list.push_back({{"task_id", t.task_id},
                        {"query_id", t.query.id},
                        {"status", to_string(t.status)},
                        {"remaining", t.remaining()},
                        {"created_at", t.created_at}});
      }
      return json_response(200, {{"tasks", std::move(list)}});
    }
  }
  if (std::regex_match(path, m, task_re) && req.method == "GET") {
    return json_response(200, task_view(service, service.get_task(m[1])));
  }
  if (std::regex_match(path, m, next_re) && req.method == "GET") {
    const std::string id = m[1];
    const auto ref = service.next_comparison(id);
    const auto task = service.get_task(id);
    if (!ref) return json_response(200, {{"exhausted", true}, {"remaining", 0}});
    return json_response(200, {{"exhausted", false},
                               {"reference", reference_to_json(*ref)},
                               {"remaining", task.remaining()}});
  }
  if (std::regex_match(path, m, cmp_re) && req.method == "POST") {
    const Json body = parse_body(req.body);
    if (!body.contains("ref_id") || !body["ref_id"].is_string() || !body.contains("outcome") ||
        !body["outcome"].is_string()) {
      fail(ErrorCode::InvalidArgument, "comparison needs string fields ref_id and outcome");
    }
    const auto summary = service.submit_comparison(
        m[1], body["ref_id"].get<std::string>(), parse_outcome(body["outcome"].get<std::string>()),
        body.value("annotator_id", std::string{}));
    return json_response(200, summary_to_json(summary));
  }
  if (std::regex_match(path, m, fin_re) && req.method == "POST") {
    const Json body = parse_body(req.body);
    const bool force = body.value("force", false);
    const auto record = service.finalize_task(m[1], force);
    return json_response(200, record_to_json(record));
  }
  if (path == "/export" && req.method == "GET") {
    std::string out;
    for (const auto& r : service.export_records(truthy(req.params, "include_discarded"))) {
      out += record_to_json(r).dump();
      out += '\n';
    }
    return {200, "application/x-ndjson", std::move(out)};
  }
  return error_response(404, "NotFound", req.method + " " + path + " is not a known route");
}

}  // namespace

ApiResponse handle_request(AnnotationService& service, const ApiRequest& request) {
  try {
    return dispatch(service, request);
  } catch (const Error& e) {
    return error_response(http_status_for(e.code()), error_code_name(e.code()), e.what());
  } catch (const Json::exception& e) {
    return error_response(400, "InvalidArgument", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "Internal", e.what());
  }
}

struct HttpServer::Impl {
  AnnotationService& service;
  httplib::Server server;

  explicit Impl(AnnotationService& s) : service(s) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      ApiRequest api{req.method, req.path, {}, req.body};
      for (const auto& [k, v] : req.params) api.params[k] = v;
      const auto out = handle_request(service, api);
      res.status = out.status;
      res.set_content(out.body, out.content_type);
    };
    const std::string any = ".*";
    server.Get(any, handler);
    server.Post(any, handler);
  }
};

HttpServer::HttpServer(AnnotationService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::serve() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace agepost
