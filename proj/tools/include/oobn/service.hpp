#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "oobn/model.hpp"
#include "oobn/msbn.hpp"
#include "oobn/session.hpp"

namespace oobn {

struct HttpRequest {
  std::string method;  // "GET", "POST", "DELETE"
  std::string path;    // without the query string
  std::multimap<std::string, std::string> params;  // decoded query parameters
  std::string body;
};

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

// In-memory model and session store behind the HTTP API. Transport-free:
// the socket binding only translates requests. Requests on distinct
// sessions run in parallel; requests on one session are serialized.
class Service {
 public:
  HttpResponse handle(const HttpRequest& req);

  std::size_t model_count() const;
  std::size_t session_count() const;

 private:
  struct ModelEntry {
    std::string id;
    ModelRef model;
    std::shared_ptr<ClassCache> cache = std::make_shared<ClassCache>();
  };
  struct SessionEntry {
    std::string id;
    std::string model_id;
    std::string created;  // ISO-8601 UTC
    std::mutex mu;
    std::unique_ptr<Session> session;
  };

  HttpResponse post_model(const HttpRequest& req);
  HttpResponse model_structure(const std::string& id);
  HttpResponse post_session(const HttpRequest& req);
  HttpResponse session_op(const std::string& id, const std::string& op, const HttpRequest& req);

  std::shared_ptr<ModelEntry> find_model(const std::string& id) const;
  std::shared_ptr<SessionEntry> find_session(const std::string& id) const;

  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<ModelEntry>> models_;
  std::map<std::string, std::shared_ptr<SessionEntry>> sessions_;
  std::uint64_t next_model_ = 1;
  std::uint64_t next_session_ = 1;
};

// Serves `service` over HTTP until the process is stopped.
// Returns non-zero when the port cannot be bound.
int run_http_server(Service& service, const std::string& host, int port);

}  // namespace oobn
