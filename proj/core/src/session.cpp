#include "oobn/session.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

namespace oobn {

using json = nlohmann::json;

namespace {

std::vector<int> ancestors_of(const FlatBN& bn, const std::vector<int>& vars) {
  std::vector<bool> seen(bn.vars.size(), false);
  std::vector<int> stack = vars;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    if (seen[v]) continue;
    seen[v] = true;
    for (int p : bn.vars[v].parents) stack.push_back(p);
  }
  std::vector<int> out;
  for (std::size_t v = 0; v < seen.size(); ++v) {
    if (seen[v]) out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<std::string> split_dots(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t dot = s.find('.', start);
    out.push_back(s.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

bool inside(const std::string& path, const std::string& container) {
  return path.size() > container.size() && path.compare(0, container.size(), container) == 0 &&
         path[container.size()] == '.';
}

}  // namespace

std::string iconized_name(const std::string& cls) { return cls + "[icon]"; }

ClassRef iconize(const ClassRef& cls, std::shared_ptr<const CoarseningSet> maps, std::uint64_t cap) {
  GroundModel gm = instantiate_class(cls, maps);
  FlatBN bn = build_flat_bn(gm);

  std::vector<int> out_attrs;
  for (int i : topological_attrs(*cls)) {
    const ValueAttr& a = cls->attrs[i];
    if (!a.output) continue;
    if (!a.simple()) {
      throw Error(codes::kIconize, "cannot iconize " + cls->name + ": output " + a.label + " is a complex object");
    }
    out_attrs.push_back(i);
  }

  auto icon = std::make_shared<ClassDef>();
  icon->name = iconized_name(cls->name);
  icon->iconized_from = cls->name;
  icon->inputs = cls->inputs;
  icon->pos = cls->pos;

  std::vector<Factor> cpts;
  for (std::size_t v = 0; v < bn.vars.size(); ++v) cpts.push_back(bn.cpt_factor(static_cast<int>(v)));

  std::vector<int> outs;  // variables of the chained outputs so far
  for (int i : out_attrs) {
    const ValueAttr& src = cls->attrs[i];
    const int var = bn.object_var[gm.objects[gm.root().children[i]].id];
    outs.push_back(var);
    std::vector<int> free;
    for (int a : ancestors_of(bn, outs)) {
      if (bn.vars[a].free_input) free.push_back(a);
    }

    ValueAttr attr;
    attr.label = src.label;
    attr.output = true;
    attr.type = src.type;
    attr.pos = src.pos;
    std::set<std::string> taken;
    std::vector<int> scope;
    for (int f : free) {
      std::vector<std::string> chain = split_dots(bn.vars[f].id.substr(cls->name.size() + 1));
      std::string slot = join(chain, "_");
      while (taken.count(slot)) slot += "_";
      taken.insert(slot);
      attr.bindings.push_back({slot, bn.vars[f].type, chain});
      scope.push_back(f);
    }
    for (std::size_t j = 0; j + 1 < outs.size(); ++j) {
      const ValueAttr& prev = cls->attrs[out_attrs[j]];
      std::string slot = prev.label;
      while (taken.count(slot)) slot += "_";
      taken.insert(slot);
      attr.bindings.push_back({slot, prev.type, {prev.label}});
      scope.push_back(outs[j]);
    }
    scope.push_back(var);

    std::uint64_t cells = 1;
    std::vector<int> sizes;
    for (int v : scope) {
      sizes.push_back(bn.vars[v].size());
      cells *= static_cast<std::uint64_t>(bn.vars[v].size());
      if (cells > cap) {
        throw Error(codes::kTooLarge, "iconized CPT for " + cls->name + "." + src.label + " exceeds " +
                                          std::to_string(cap) + " cells");
      }
    }
    Factor joint = eliminate(cpts, scope, sizes);
    const int k = bn.vars[var].size();
    attr.cpt.resize(joint.table.size());
    for (std::size_t r = 0; r < joint.table.size() / k; ++r) {
      double z = 0.0;
      for (int x = 0; x < k; ++x) z += joint.table[r * k + x];
      for (int x = 0; x < k; ++x) attr.cpt[r * k + x] = z > 0.0 ? joint.table[r * k + x] / z : 1.0 / k;
    }
    icon->attrs.push_back(std::move(attr));
  }
  std::vector<Diagnostic> diags = validate_class(*icon, *maps);
  if (!diags.empty()) throw Error(std::move(diags));
  return icon;
}

std::string to_string(Engine e) { return e == Engine::kFlat ? "flat" : "msbn"; }

Engine parse_engine(const std::string& s) {
  if (s == "flat") return Engine::kFlat;
  if (s == "msbn") return Engine::kMsbn;
  throw Error(codes::kBadQuery, "unknown engine '" + s + "' (expected flat or msbn)");
}

std::string to_string(RefinementOp::Kind k) {
  switch (k) {
    case RefinementOp::Kind::kIconize:
      return "ICONIZE";
    case RefinementOp::Kind::kDeiconize:
      return "DEICONIZE";
    case RefinementOp::Kind::kSubstitute:
      return "SUBSTITUTE";
  }
  return "";
}

RefinementOp::Kind parse_refinement_kind(const std::string& s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (u == "ICONIZE") return RefinementOp::Kind::kIconize;
  if (u == "DEICONIZE") return RefinementOp::Kind::kDeiconize;
  if (u == "SUBSTITUTE") return RefinementOp::Kind::kSubstitute;
  throw Error(codes::kBadQuery, "unknown refinement kind '" + s + "'");
}

Session::Session(ModelRef model, SessionOptions options) : model_(std::move(model)), options_(std::move(options)) {
  gm_ = std::make_shared<const GroundModel>(instantiate(*model_));
  bn_ = std::make_shared<const FlatBN>(build_flat_bn(*gm_));
  if (options_.engine == Engine::kMsbn) {
    ht_ = std::make_unique<Hypertree>(gm_, bn_, options_.cache);
    ht_->collect();
  } else {
    rebuild_flat();
  }
  log_op(json{{"op", "load"}, {"engine", to_string(options_.engine)}}.dump());
}

void Session::log_op(const std::string& line) { log_.push_back(line); }

std::string Session::relative(const std::string& path) const {
  return join(split_path(path), ".");
}

int Session::resolve_variable(const std::string& path) const {
  std::vector<std::string> chain = split_path(path);
  if (chain.empty()) throw Error(codes::kBadChain, "empty path");
  int obj = resolve_chain(*gm_, 0, chain);
  int var = bn_->object_var[obj];
  if (var < 0) throw Error(codes::kBadChain, "'" + path + "' denotes a complex object, not a variable");
  return var;
}

int Session::value_index(int var, const std::string& value) const {
  const auto& vals = bn_->vars[var].type->values();
  auto it = std::find(vals.begin(), vals.end(), value);
  if (it == vals.end()) {
    throw Error(codes::kBadValue, "'" + value + "' is not a value of " + bn_->vars[var].id);
  }
  return static_cast<int>(it - vals.begin());
}

void Session::rebuild_flat() {
  jt_ = std::make_unique<JunctionTree>(*bn_);
  for (const auto& [id, x] : evidence_) jt_->set_evidence(bn_->find(id), x);
}

void Session::calibrate_flat() {
  if (jt_->calibrated()) return;
  CostCounter cost;
  jt_->calibrate(&cost);
  flat_cost_.collect += cost.cells;
  recalibrated_ = {gm_->root().path};
}

void Session::begin_operation() {
  recalibrated_.clear();
  if (ht_) ht_->begin_operation();
}

Factor Session::posterior(const std::vector<int>& vars) {
  if (ht_) return ht_->marginal(vars);
  calibrate_flat();
  return jt_->marginal(vars);
}

QueryResult Session::query(const std::vector<std::string>& targets, const std::vector<EvidenceItem>& evidence) {
  QueryResult r;
  r.targets = targets;
  std::vector<int> vars;
  for (const auto& t : targets) {
    int v = resolve_variable(t);
    vars.push_back(v);
    r.variables.push_back(bn_->vars[v].id);
    r.domains.push_back(bn_->vars[v].type->values());
  }
  std::vector<std::pair<int, int>> scoped;
  for (const auto& e : evidence) {
    int v = resolve_variable(e.path);
    int x = value_index(v, e.value);
    for (const auto& [pv, px] : scoped) {
      if (pv == v && px != x) throw Error(codes::kZeroProb, "conflicting evidence on " + bn_->vars[v].id);
    }
    scoped.emplace_back(v, x);
  }
  begin_operation();

  // Call-scoped evidence replaces session evidence for the duration of the call.
  std::map<int, std::optional<int>> saved;
  for (const auto& [v, x] : scoped) {
    if (saved.count(v)) continue;
    auto it = evidence_.find(bn_->vars[v].id);
    saved[v] = it == evidence_.end() ? std::nullopt : std::optional<int>(it->second);
  }
  auto apply = [&](int v, std::optional<int> x) {
    if (ht_) {
      if (x) ht_->set_evidence(v, *x);
      else ht_->retract_evidence(v);
    } else {
      if (x) jt_->set_evidence(v, *x);
      else jt_->retract_evidence(v);
    }
  };
  for (const auto& [v, x] : scoped) apply(v, x);
  try {
    r.table = posterior(vars);
  } catch (...) {
    for (const auto& [v, x] : saved) apply(v, x);
    throw;
  }
  for (const auto& [v, x] : saved) apply(v, x);

  json line{{"op", "query"}, {"targets", targets}, {"evidence", json::array()}};
  for (const auto& e : evidence) line["evidence"].push_back({{"path", e.path}, {"value", e.value}});
  log_op(line.dump());
  return r;
}

void Session::assert_evidence(const std::string& path, const std::string& value) {
  int v = resolve_variable(path);
  int x = value_index(v, value);
  const std::string& id = bn_->vars[v].id;
  auto prev = evidence_.find(id);
  std::optional<int> old = prev == evidence_.end() ? std::nullopt : std::optional<int>(prev->second);
  begin_operation();
  evidence_[id] = x;
  try {
    if (ht_) {
      ht_->set_evidence(v, x);
      ht_->collect();
    } else {
      jt_->set_evidence(v, x);
      calibrate_flat();
    }
  } catch (const Error&) {
    if (old) {
      evidence_[id] = *old;
      if (ht_) ht_->set_evidence(v, *old);
      else jt_->set_evidence(v, *old);
    } else {
      evidence_.erase(id);
      if (ht_) ht_->retract_evidence(v);
      else jt_->retract_evidence(v);
    }
    throw;
  }
  log_op(json{{"op", "assert"}, {"path", path}, {"value", value}}.dump());
}

void Session::retract_evidence(const std::string& path) {
  int v = resolve_variable(path);
  begin_operation();
  evidence_.erase(bn_->vars[v].id);
  if (ht_) ht_->retract_evidence(v);
  else jt_->retract_evidence(v);
  log_op(json{{"op", "retract"}, {"path", path}}.dump());
}

std::vector<EvidenceItem> Session::evidence() const {
  std::vector<EvidenceItem> out;
  for (const auto& [id, x] : evidence_) {
    const int v = bn_->find(id);
    out.push_back({id, bn_->vars[v].type->values()[x]});
  }
  return out;
}

ClassRef Session::icon_of(const ClassRef& cls) const {
  auto it = icons_.find(cls->name);
  if (it != icons_.end()) return it->second;
  ClassRef icon = iconize(cls, model_->types.maps, options_.iconize_cap);
  icons_[cls->name] = icon;
  return icon;
}

ClassRef Session::effective(const Override& o) const {
  ClassRef cls = model_->find_class(o.cls);
  if (!cls) throw Error(codes::kIncompatibleClass, "unknown class '" + o.cls + "'");
  return o.iconized ? icon_of(cls) : cls;
}

bool Session::is_iconized(const std::string& path) const {
  auto it = overrides_.find(relative(path));
  return it != overrides_.end() && it->second.iconized;
}

void Session::check_substitution(int object, const ClassRef& replacement) const {
  const GroundObject& obj = gm_->objects[object];
  ClassRef current = obj.cls;
  if (!current->iconized_from.empty()) current = model_->find_class(current->iconized_from);
  const std::string where = obj.path;

  // Outputs that the rest of the model reads from this object.
  IOSet io = compute_io_sets(*gm_, *bn_).at(object);
  std::set<std::string> used_set;
  for (int v : io.exported) {
    const std::string& id = bn_->vars[v].id;
    used_set.insert(split_dots(id.substr(where.size() + 1)).front());
  }
  std::vector<std::string> used(used_set.begin(), used_set.end());
  for (const auto& o : used) {
    const ValueAttr* a = replacement->attr(o);
    if (!a || !a->output) {
      throw Error(codes::kIncompatibleClass,
                  replacement->name + " has no output '" + o + "' used by the model at " + where);
    }
  }
  InterfaceType mine = projected_interface(*replacement, used);
  InterfaceType theirs = projected_interface(*current, used);
  if (auto why = interface_violation(mine, theirs, *gm_->maps)) {
    throw Error(codes::kIncompatibleClass, replacement->name + " is not interface-compatible with " + current->name +
                                               " at " + where + ": " + *why);
  }
  std::set<std::string> bound;
  for (const auto& b : obj.spec().bindings) bound.insert(b.slot);
  for (const auto& a : replacement->attrs) {
    for (const auto& in : required_inputs(*replacement, {a.label})) {
      if (!bound.count(in)) {
        throw Error(codes::kIncompatibleClass,
                    replacement->name + " requires input '" + in + "' which is not bound at " + where);
      }
    }
  }
}

std::vector<std::string> Session::compatible_classes(const std::string& path) const {
  const std::string rel = relative(path);
  const int object = gm_->find(gm_->root().path + "." + rel);
  if (object < 0 || gm_->objects[object].simple()) throw Error(codes::kUnknownPath, "no complex object at '" + path + "'");
  std::vector<std::string> out;
  for (const auto& name : model_->class_order) {
    try {
      check_substitution(object, model_->find_class(name));
      out.push_back(name);
    } catch (const Error&) {
    }
  }
  return out;
}

std::vector<HierarchyEntry> Session::hierarchy() const {
  std::vector<HierarchyEntry> out;
  for (const auto& name : model_->class_order) out.push_back({name, model_->find_class(name)->parent, ""});
  for (const auto& [name, icon] : icons_) out.push_back({icon->name, "", name});
  return out;
}

LocalityStats Session::apply(const RefinementOp& op) {
  const std::string rel = relative(op.path);
  const std::string full = gm_->root().path + "." + rel;
  const int object = rel.empty() ? -1 : gm_->find(full);
  if (object < 0 || gm_->objects[object].simple()) {
    throw Error(codes::kUnknownPath, "no complex object at '" + op.path + "'");
  }
  const GroundObject& target = gm_->objects[object];
  const std::string current_cls =
      target.cls->iconized_from.empty() ? target.cls->name : target.cls->iconized_from;
  const bool iconized = !target.cls->iconized_from.empty();

  std::map<std::string, Override> next = overrides_;
  auto drop_nested = [&] {
    for (auto it = next.begin(); it != next.end();) {
      it = inside(it->first, rel) ? next.erase(it) : std::next(it);
    }
  };
  switch (op.kind) {
    case RefinementOp::Kind::kIconize:
      if (iconized) throw Error(codes::kIconize, full + " is already iconized");
      drop_nested();
      next[rel] = {current_cls, true};
      break;
    case RefinementOp::Kind::kDeiconize:
      if (!iconized) throw Error(codes::kIconize, full + " is not iconized");
      next[rel] = {current_cls, false};
      break;
    case RefinementOp::Kind::kSubstitute: {
      ClassRef repl = model_->find_class(op.cls);
      if (!repl) throw Error(codes::kIncompatibleClass, "unknown class '" + op.cls + "'");
      check_substitution(object, repl);
      drop_nested();
      next[rel] = {op.cls, iconized};
      break;
    }
  }

  ClassOverrides classes;
  for (const auto& [p, o] : next) classes[p] = effective(o);
  std::shared_ptr<const GroundModel> gm;
  try {
    gm = std::make_shared<const GroundModel>(instantiate(*model_, classes));
  } catch (const Error& e) {
    if (e.code() == codes::kTypeCompat) throw Error(codes::kIncompatibleClass, e.what());
    throw;
  }
  auto bn = std::make_shared<const FlatBN>(build_flat_bn(*gm));

  std::vector<std::string> orphaned;
  for (const auto& [id, x] : evidence_) {
    if (bn->find(id) < 0) orphaned.push_back(id);
  }
  if (!orphaned.empty()) {
    throw Error(codes::kEvidenceOrphaned,
                "evidence on " + join(orphaned, ", ") + " would not survive; retract it first");
  }

  LocalityStats stats;
  stats.kind = to_string(op.kind);
  stats.path = full;
  if (ht_) {
    Hypertree scratch = *ht_;
    auto fresh = std::make_unique<Hypertree>(gm, bn, options_.cache, &scratch);
    fresh->begin_operation();
    fresh->collect();
    const RebuildStats& rs = fresh->rebuild_stats();
    stats.rebuilt = rs.rebuilt;
    stats.reused = rs.reused;
    stats.removed = rs.removed;
    for (const auto& p : rs.rebuilt) {
      if (inside(p, full)) stats.rebuilt_inside.push_back(p);
    }
    stats.recalibrated = fresh->recalibrated();
    stats.messages_updated = fresh->messages_updated();
    ht_ = std::move(fresh);
    gm_ = gm;
    bn_ = bn;
  } else {
    auto old_gm = gm_;
    auto old_bn = bn_;
    gm_ = gm;
    bn_ = bn;
    try {
      rebuild_flat();
      recalibrated_.clear();
      calibrate_flat();
    } catch (...) {
      gm_ = old_gm;
      bn_ = old_bn;
      rebuild_flat();
      throw;
    }
    stats.rebuilt = {gm_->root().path};
    stats.recalibrated = recalibrated_;
    stats.messages_updated = {};
  }
  overrides_ = std::move(next);
  history_.push_back(op);
  json line{{"op", "refine"}, {"kind", to_string(op.kind)}, {"path", op.path}};
  if (op.kind == RefinementOp::Kind::kSubstitute) line["class"] = op.cls;
  log_op(line.dump());
  return stats;
}

CostReport Session::cost_report() const {
  if (ht_) return ht_->cost_report();
  CostReport r;
  r.subnets.push_back({gm_->root().path, flat_cost_});
  r.total = flat_cost_.total();
  r.recalibrated = recalibrated_;
  return r;
}

void Session::reset_costs() {
  if (ht_) ht_->reset_costs();
  flat_cost_ = SubnetCost{};
}

ReplayResult replay(ModelRef model, const std::vector<std::string>& lines, std::shared_ptr<ClassCache> cache) {
  ReplayResult out;
  int lineno = 0;
  for (const auto& raw : lines) {
    ++lineno;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(raw, nullptr, false);
    auto bad = [&](const std::string& why) {
      return Error(std::vector<Diagnostic>{{codes::kBadLog, why, lineno, 0}});
    };
    if (j.is_discarded() || !j.is_object() || !j.contains("op") || !j["op"].is_string()) {
      throw bad("not a JSON object with an \"op\" field");
    }
    auto str = [&](const char* key) {
      if (!j.contains(key) || !j[key].is_string()) throw bad(std::string("missing string field \"") + key + "\"");
      return j[key].get<std::string>();
    };
    const std::string op = j["op"].get<std::string>();
    if (op == "load") {
      SessionOptions opts;
      opts.engine = parse_engine(j.value("engine", std::string("msbn")));
      opts.cache = cache;
      out.session = std::make_unique<Session>(model, opts);
      continue;
    }
    if (!out.session) throw bad("operation before load");
    Session& s = *out.session;
    if (op == "assert") {
      s.assert_evidence(str("path"), str("value"));
    } else if (op == "retract") {
      s.retract_evidence(str("path"));
    } else if (op == "query") {
      if (!j.contains("targets") || !j["targets"].is_array()) throw bad("query needs a targets array");
      std::vector<std::string> targets;
      for (const auto& t : j["targets"]) {
        if (!t.is_string()) throw bad("targets must be strings");
        targets.push_back(t.get<std::string>());
      }
      std::vector<EvidenceItem> ev;
      if (j.contains("evidence")) {
        if (!j["evidence"].is_array()) throw bad("evidence must be an array");
        for (const auto& e : j["evidence"]) {
          if (!e.is_object() || !e.contains("path") || !e.contains("value") || !e["path"].is_string() ||
              !e["value"].is_string()) {
            throw bad("evidence items need string path and value");
          }
          ev.push_back({e["path"].get<std::string>(), e["value"].get<std::string>()});
        }
      }
      out.queries.push_back(s.query(targets, ev));
    } else if (op == "refine") {
      RefinementOp r;
      r.kind = parse_refinement_kind(str("kind"));
      r.path = str("path");
      if (r.kind == RefinementOp::Kind::kSubstitute) r.cls = str("class");
      s.apply(r);
    } else {
      throw bad("unknown op '" + op + "'");
    }
  }
  if (!out.session) throw Error(codes::kBadLog, "log has no load operation");
  return out;
}

}  // namespace oobn
