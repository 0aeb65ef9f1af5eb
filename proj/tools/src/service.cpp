#include "oobn/service.hpp"

#include <ctime>

#include "oobn/api_json.hpp"

namespace oobn {

using api::json;

namespace {

inline constexpr const char* kNotFound = "E_NOT_FOUND";
inline constexpr const char* kBadRequest = "E_BAD_REQUEST";

HttpResponse reply(int status, json body) {
  body["schema_version"] = api::kSchemaVersion;
  return {status, body.dump()};
}

HttpResponse fail(int status, const std::string& code, const std::string& message) {
  return reply(status, {{"error", {{"code", code}, {"message", message}}}, {"diagnostics", json::array()}});
}

int status_for(const Error& e) {
  if (e.code() == codes::kZeroProb) return 409;
  if (e.code() == codes::kInternal || e.code() == codes::kCoverage) return 500;
  return 400;
}

HttpResponse fail(const Error& e) { return {status_for(e), api::error_json(e).dump()}; }

std::vector<std::string> split(const std::string& path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    std::size_t j = path.find('/', i);
    if (j == std::string::npos) j = path.size();
    if (j > i) out.push_back(path.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

std::string now_iso() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Parses a JSON object body; empty bodies count as {}.
std::optional<json> object_body(const std::string& body) {
  if (body.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

std::optional<std::string> string_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) return std::nullopt;
  return j[key].get<std::string>();
}

}  // namespace

std::size_t Service::model_count() const {
  std::shared_lock lock(mu_);
  return models_.size();
}

std::size_t Service::session_count() const {
  std::shared_lock lock(mu_);
  return sessions_.size();
}

std::shared_ptr<Service::ModelEntry> Service::find_model(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = models_.find(id);
  return it == models_.end() ? nullptr : it->second;
}

std::shared_ptr<Service::SessionEntry> Service::find_session(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

HttpResponse Service::handle(const HttpRequest& req) {
  try {
    std::vector<std::string> parts = split(req.path);
    if (parts.size() == 1 && parts[0] == "models") {
      if (req.method == "POST") return post_model(req);
      return fail(405, kBadRequest, "use POST /models");
    }
    if (parts.size() == 3 && parts[0] == "models" && parts[2] == "structure") {
      if (req.method == "GET") return model_structure(parts[1]);
      return fail(405, kBadRequest, "use GET");
    }
    if (parts.size() == 1 && parts[0] == "sessions") {
      if (req.method == "POST") return post_session(req);
      return fail(405, kBadRequest, "use POST /sessions");
    }
    if (parts.size() == 3 && parts[0] == "sessions") return session_op(parts[1], parts[2], req);
    return fail(404, kNotFound, "no route for " + req.method + " " + req.path);
  } catch (const Error& e) {
    return fail(e);
  } catch (const std::exception& e) {
    return fail(500, codes::kInternal, e.what());
  }
}

HttpResponse Service::post_model(const HttpRequest& req) {
  std::string text = req.body;
  // A JSON object with a "source" field is accepted as well as raw text.
  json j = json::parse(req.body, nullptr, false);
  if (!j.is_discarded() && j.is_object() && j.contains("source") && j["source"].is_string()) {
    text = j["source"].get<std::string>();
  }
  ModelRef model;
  try {
    model = compile_text(text);
    instantiate(*model);
  } catch (const Error& e) {
    return fail(e);
  }
  auto entry = std::make_shared<ModelEntry>();
  entry->model = model;
  {
    std::unique_lock lock(mu_);
    entry->id = "m" + std::to_string(next_model_++);
    models_[entry->id] = entry;
  }
  return reply(201, {{"model_id", entry->id}, {"diagnostics", json::array()}});
}

HttpResponse Service::model_structure(const std::string& id) {
  auto entry = find_model(id);
  if (!entry) return fail(404, kNotFound, "no model '" + id + "'");
  auto gm = std::make_shared<const GroundModel>(instantiate(*entry->model));
  auto bn = std::make_shared<const FlatBN>(build_flat_bn(*gm));
  Hypertree ht(gm, bn);
  json out = api::structure_json(*gm, *bn, ht, api::declared_hierarchy(*entry->model));
  out["model_id"] = id;
  return {200, out.dump()};
}

HttpResponse Service::post_session(const HttpRequest& req) {
  auto body = object_body(req.body);
  if (!body) return fail(400, kBadRequest, "body must be a JSON object");
  auto model_id = string_field(*body, "model");
  if (!model_id) return fail(400, kBadRequest, "missing string field 'model'");
  auto model = find_model(*model_id);
  if (!model) return fail(404, kNotFound, "no model '" + *model_id + "'");
  SessionOptions opts;
  if (body->contains("engine")) {
    auto e = string_field(*body, "engine");
    if (!e) return fail(400, kBadRequest, "'engine' must be a string");
    opts.engine = parse_engine(*e);
  }
  opts.cache = model->cache;
  auto entry = std::make_shared<SessionEntry>();
  entry->model_id = *model_id;
  entry->created = now_iso();
  entry->session = std::make_unique<Session>(model->model, opts);
  {
    std::unique_lock lock(mu_);
    entry->id = "s" + std::to_string(next_session_++);
    sessions_[entry->id] = entry;
  }
  return reply(201, {{"session_id", entry->id},
                     {"model_id", entry->model_id},
                     {"engine", to_string(opts.engine)},
                     {"created", entry->created}});
}

HttpResponse Service::session_op(const std::string& id, const std::string& op, const HttpRequest& req) {
  auto entry = find_session(id);
  if (!entry) return fail(404, kNotFound, "no session '" + id + "'");
  std::lock_guard lock(entry->mu);
  Session& s = *entry->session;

  if (op == "evidence") {
    if (req.method == "GET") return reply(200, {{"evidence", api::evidence_json(s.evidence())}});
    auto body = object_body(req.body);
    if (!body) return fail(400, kBadRequest, "body must be a JSON object");
    std::optional<std::string> path = string_field(*body, "path");
    if (!path) {
      auto it = req.params.find("path");
      if (it != req.params.end()) path = it->second;
    }
    if (!path) return fail(400, kBadRequest, "missing 'path'");
    if (req.method == "POST") {
      auto value = string_field(*body, "value");
      if (!value) return fail(400, kBadRequest, "missing string field 'value'");
      s.assert_evidence(*path, *value);
    } else if (req.method == "DELETE") {
      s.retract_evidence(*path);
    } else {
      return fail(405, kBadRequest, "use GET, POST or DELETE");
    }
    return reply(200, {{"evidence", api::evidence_json(s.evidence())},
                       {"subnets_recalibrated", s.cost_report().recalibrated}});
  }
  if (op == "query") {
    if (req.method != "GET") return fail(405, kBadRequest, "use GET");
    std::vector<std::string> targets;
    std::vector<EvidenceItem> ev;
    auto [tb, te] = req.params.equal_range("target");
    for (auto it = tb; it != te; ++it) targets.push_back(it->second);
    auto [eb, ee] = req.params.equal_range("evidence");
    for (auto it = eb; it != ee; ++it) {
      auto eq = it->second.find('=');
      if (eq == std::string::npos) return fail(400, kBadRequest, "evidence must be path=value");
      ev.push_back({it->second.substr(0, eq), it->second.substr(eq + 1)});
    }
    if (targets.empty()) return fail(400, kBadRequest, "at least one target is required");
    json out = api::query_json(s.query(targets, ev));
    out["subnets_recalibrated"] = s.cost_report().recalibrated;
    return reply(200, std::move(out));
  }
  if (op == "refine") {
    if (req.method != "POST") return fail(405, kBadRequest, "use POST");
    auto body = object_body(req.body);
    if (!body) return fail(400, kBadRequest, "body must be a JSON object");
    auto kind = string_field(*body, "kind");
    auto path = string_field(*body, "path");
    if (!kind || !path) return fail(400, kBadRequest, "fields 'kind' and 'path' are required");
    RefinementOp r;
    r.kind = parse_refinement_kind(*kind);
    r.path = *path;
    if (r.kind == RefinementOp::Kind::kSubstitute) {
      auto cls = string_field(*body, "class");
      if (!cls) return fail(400, kBadRequest, "SUBSTITUTE needs a 'class'");
      r.cls = *cls;
    }
    return reply(200, {{"stats", api::locality_json(s.apply(r))}});
  }
  if (op == "stats") {
    if (req.method != "GET") return fail(405, kBadRequest, "use GET");
    return reply(200, api::cost_json(s.cost_report()));
  }
  if (op == "structure") {
    if (req.method != "GET") return fail(405, kBadRequest, "use GET");
    std::unique_ptr<Hypertree> own;
    const Hypertree* ht = s.hypertree();
    if (!ht) {
      own = std::make_unique<Hypertree>(std::make_shared<const GroundModel>(s.ground()),
                                        std::make_shared<const FlatBN>(s.bn()));
      ht = own.get();
    }
    json out = api::structure_json(s.ground(), s.bn(), *ht, s.hierarchy());
    out["session_id"] = id;
    return {200, out.dump()};
  }
  if (op == "compatible") {
    if (req.method != "GET") return fail(405, kBadRequest, "use GET");
    auto it = req.params.find("path");
    if (it == req.params.end()) return fail(400, kBadRequest, "missing 'path'");
    return reply(200, {{"path", it->second}, {"classes", s.compatible_classes(it->second)}});
  }
  if (op == "log") {
    if (req.method != "GET") return fail(405, kBadRequest, "use GET");
    return reply(200, {{"lines", s.log()}});
  }
  return fail(404, kNotFound, "no session operation '" + op + "'");
}

}  // namespace oobn
