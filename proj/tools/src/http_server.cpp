#include "httplib.h"
#include "oobn/service.hpp"

namespace oobn {

int run_http_server(Service& service, const std::string& host, int port) {
  httplib::Server server;
  auto bridge = [&service](const httplib::Request& req, httplib::Response& res) {
    HttpRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.params.emplace(k, v);
    r.body = req.body;
    HttpResponse out = service.handle(r);
    res.status = out.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(out.body, "application/json");
  };
  const char* pattern = R"(/.*)";
  server.Get(pattern, bridge);
  server.Post(pattern, bridge);
  server.Delete(pattern, bridge);
  server.Options(pattern, [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  if (!server.bind_to_port(host, port)) return 1;
  server.listen_after_bind();
  return 0;
}

}  // namespace oobn
