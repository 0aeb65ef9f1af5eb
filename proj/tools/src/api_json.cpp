#include "oobn/api_json.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <sstream>

namespace oobn::api {

std::string prob(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", p);
  return buf;
}

json diagnostics_json(const std::vector<Diagnostic>& diags) {
  json out = json::array();
  for (const auto& d : diags) {
    json j{{"code", d.code}, {"message", d.message}};
    if (d.line > 0) {
      j["line"] = d.line;
      j["column"] = d.column;
    }
    out.push_back(std::move(j));
  }
  return out;
}

json error_json(const Error& e) {
  return {{"schema_version", kSchemaVersion},
          {"error", {{"code", e.code()}, {"message", e.diagnostics().front().message}}},
          {"diagnostics", diagnostics_json(e.diagnostics())}};
}

json query_json(const QueryResult& r) {
  json rows = json::array();
  std::vector<std::size_t> idx(r.domains.size(), 0);
  for (double p : r.table.table) {
    json values = json::array();
    for (std::size_t i = 0; i < idx.size(); ++i) values.push_back(r.domains[i][idx[i]]);
    rows.push_back({{"values", std::move(values)}, {"p", prob(p)}});
    for (int k = static_cast<int>(idx.size()) - 1; k >= 0; --k) {
      if (++idx[k] < r.domains[k].size()) break;
      idx[k] = 0;
    }
  }
  return {{"targets", r.targets}, {"variables", r.variables}, {"domains", r.domains}, {"rows", std::move(rows)}};
}

json cost_json(const CostReport& r) {
  json subnets = json::array();
  for (const auto& e : r.subnets) {
    subnets.push_back({{"path", e.path},
                       {"collect", e.cost.collect},
                       {"distribute", e.cost.distribute},
                       {"total", e.cost.total()}});
  }
  return {{"subnets", std::move(subnets)},
          {"total", r.total},
          {"cache_hits", r.cache_hits},
          {"cache_misses", r.cache_misses},
          {"subnets_recalibrated", r.recalibrated}};
}

json locality_json(const LocalityStats& s) {
  return {{"kind", s.kind},
          {"path", s.path},
          {"subnets_rebuilt", s.rebuilt},
          {"subnets_reused", s.reused},
          {"subnets_removed", s.removed},
          {"rebuilt_inside", s.rebuilt_inside.size()},
          {"rebuilt_inside_paths", s.rebuilt_inside},
          {"subnets_recalibrated", s.recalibrated},
          {"messages_updated", s.messages_updated}};
}

json evidence_json(const std::vector<EvidenceItem>& ev) {
  json out = json::array();
  for (const auto& e : ev) out.push_back({{"path", e.path}, {"value", e.value}});
  return out;
}

json bn_json(const FlatBN& bn) {
  json vars = json::array();
  for (const auto& v : bn.vars) {
    json parents = json::array();
    for (int p : v.parents) parents.push_back(bn.vars[p].id);
    json cpt = json::array();
    for (double x : v.cpt) cpt.push_back(prob(x));
    vars.push_back({{"id", v.id},
                    {"type", v.type->name()},
                    {"domain", v.type->values()},
                    {"parents", std::move(parents)},
                    {"cpt", std::move(cpt)},
                    {"free_input", v.free_input}});
  }
  return {{"schema_version", kSchemaVersion}, {"variables", std::move(vars)}};
}

json object_tree_json(const GroundModel& gm, const FlatBN& bn) {
  std::function<json(int)> node = [&](int id) {
    const GroundObject& o = gm.objects[id];
    json j{{"path", o.path}, {"label", o.label}, {"sigma", gm.sigma_label(id)}};
    if (o.simple()) {
      const FlatVariable& v = bn.vars[bn.object_var[id]];
      j["kind"] = "simple";
      j["type"] = v.type->name();
      j["domain"] = v.type->values();
      j["output"] = o.spec().output;
      return j;
    }
    j["kind"] = "complex";
    j["class"] = o.cls->name;
    j["iconized"] = !o.cls->iconized_from.empty();
    if (o.container >= 0) j["output"] = o.spec().output;
    json kids = json::array();
    std::vector<int> order;
    for (int c : o.children) {
      if (c >= 0) order.push_back(c);
    }
    std::sort(order.begin(), order.end());
    for (int c : order) kids.push_back(node(c));
    j["children"] = std::move(kids);
    return j;
  };
  return node(0);
}

json hypertree_json(const Hypertree& ht) {
  const FlatBN& bn = ht.bn();
  auto ids = [&](const std::vector<int>& vs) {
    json a = json::array();
    for (int v : vs) a.push_back(bn.vars[v].id);
    return a;
  };
  json subnets = json::array();
  for (std::size_t s = 0; s < ht.subnets().size(); ++s) {
    const auto& sub = ht.subnets()[s];
    json children = json::array();
    for (int c : sub.children) children.push_back(ht.subnets()[c].path);
    subnets.push_back({{"path", sub.path},
                       {"parent", sub.parent < 0 ? json(nullptr) : json(ht.subnets()[sub.parent].path)},
                       {"children", std::move(children)},
                       {"variables", ids(sub.sigma)},
                       {"local", ids(sub.local)},
                       {"imported", ids(sub.io.imported)},
                       {"exported", ids(sub.io.exported)},
                       {"dsepset", ids(ht.dsepset(static_cast<int>(s)))},
                       {"cliques", sub.tree.tree().cliques.size()}});
  }
  return {{"subnets", std::move(subnets)}};
}

json hierarchy_json(const std::vector<HierarchyEntry>& entries) {
  json out = json::array();
  for (const auto& e : entries) {
    json j{{"name", e.name}, {"parent", e.parent.empty() ? json(nullptr) : json(e.parent)}};
    if (!e.iconized_from.empty()) j["iconized_from"] = e.iconized_from;
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<HierarchyEntry> declared_hierarchy(const CompiledModel& model) {
  std::vector<HierarchyEntry> out;
  for (const auto& name : model.class_order) out.push_back({name, model.find_class(name)->parent, ""});
  return out;
}

json structure_json(const GroundModel& gm, const FlatBN& bn, const Hypertree& ht,
                    const std::vector<HierarchyEntry>& hierarchy) {
  return {{"schema_version", kSchemaVersion},
          {"object_tree", object_tree_json(gm, bn)},
          {"class_hierarchy", hierarchy_json(hierarchy)},
          {"hypertree", hypertree_json(ht)}};
}

std::string query_table(const QueryResult& r) {
  json q = query_json(r);
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header = r.targets;
  header.push_back("P");
  cells.push_back(header);
  for (const auto& row : q["rows"]) {
    std::vector<std::string> line;
    for (const auto& v : row["values"]) line.push_back(v.get<std::string>());
    line.push_back(row["p"].get<std::string>());
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::ostringstream os;
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      os << line[i];
      if (i + 1 < line.size()) os << std::string(width[i] - line[i].size() + 2, ' ');
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace oobn::api
