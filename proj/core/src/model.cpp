#include "oobn/model.hpp"

#include <cmath>
#include <functional>
#include <queue>
#include <set>
#include <sstream>

namespace oobn {

namespace {

Diagnostic diag_at(const char* code, std::string message, const dsl::SourcePos& pos) {
  return Diagnostic{code, std::move(message), pos.line, pos.column};
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

}  // namespace

std::vector<int> topological_attrs(const ClassDef& cls) {
  const int n = static_cast<int>(cls.attrs.size());
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<int>> out(n);
  for (int i = 0; i < n; ++i) {
    for (const auto& p : cls.dag_parents(cls.attrs[i])) {
      int j = cls.attr_index(p);
      if (j < 0) continue;
      out[j].push_back(i);
      ++indegree[i];
    }
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<int> order;
  while (!ready.empty()) {
    int i = ready.top();
    ready.pop();
    order.push_back(i);
    for (int j : out[i]) {
      if (--indegree[j] == 0) ready.push(j);
    }
  }
  return order;
}

std::vector<Diagnostic> validate_class(const ClassDef& cls, const CoarseningSet& maps) {
  std::vector<Diagnostic> diags;
  for (const auto& a : cls.attrs) {
    const std::string who = cls.name + "." + a.label;
    if (a.simple() && (!a.type || !a.type->is_basic())) {
      diags.push_back(diag_at(codes::kAnnotType, who + ": simple attribute needs a basic type", a.pos));
      continue;
    }
    std::set<std::string> heads;
    for (const auto& b : a.bindings) {
      const std::string text = who + "." + b.slot + " <- " + join(b.chain, ".");
      if (b.chain.empty()) {
        diags.push_back(diag_at(codes::kAnnotType, text + ": empty chain", a.pos));
        continue;
      }
      heads.insert(b.chain.front());
      if (b.chain.front() == a.label) continue;  // reported as a cycle below
      std::string why;
      TypeRef t = chain_type(cls, b.chain, &why);
      if (!t) {
        diags.push_back(diag_at(codes::kAnnotType, text + ": " + why, a.pos));
      } else if (!b.slot_type) {
        diags.push_back(diag_at(codes::kAnnotType, text + ": slot has no type", a.pos));
      } else if (!is_value_subtype(*t, *b.slot_type, maps)) {
        diags.push_back(diag_at(codes::kAnnotType,
                                text + ": source type " + t->describe() + " is not a subtype of " +
                                    b.slot_type->describe(),
                                a.pos));
      } else if (a.simple() && !b.slot_type->is_basic()) {
        diags.push_back(diag_at(codes::kAnnotType, text + ": input of a simple attribute must be basic", a.pos));
      }
    }
    if (!a.simple()) {
      for (const auto& in : a.cls->inputs) {
        if (!a.binding(in.label)) {
          diags.push_back(diag_at(codes::kAnnotType, who + ": input '" + in.label + "' of " + a.cls->name +
                                                         " is not annotated",
                                  a.pos));
        }
      }
      for (const auto& b : a.bindings) {
        if (!a.cls->input(b.slot)) {
          diags.push_back(diag_at(codes::kAnnotType, who + ": '" + b.slot + "' is not an input of " + a.cls->name, a.pos));
        }
      }
    }
    for (const auto& p : a.extra_parents) {
      if (!cls.input(p) && !cls.attr(p)) {
        diags.push_back(diag_at(codes::kUnknownName, who + ": unknown parent '" + p + "'", a.pos));
      } else if (!heads.count(p)) {
        diags.push_back(diag_at(codes::kUnusedParent, who + ": parent '" + p + "' annotates no input", a.pos));
      }
    }
    if (a.simple()) {
      const size_t k = static_cast<size_t>(a.type->size());
      bool slots_ok = std::all_of(a.bindings.begin(), a.bindings.end(),
                                  [](const SlotBinding& b) { return b.slot_type && b.slot_type->is_basic(); });
      if (!slots_ok) continue;
      const size_t rows = cpt_rows(a);
      if (a.cpt.size() != rows * k) {
        diags.push_back(diag_at(codes::kCpt,
                                who + ": CPT has " + std::to_string(a.cpt.size()) + " entries, expected " +
                                    std::to_string(rows * k),
                                a.pos));
        continue;
      }
      for (size_t r = 0; r < rows; ++r) {
        double sum = 0.0;
        bool bad = false;
        for (size_t j = 0; j < k; ++j) {
          double p = a.cpt[r * k + j];
          if (!std::isfinite(p) || p < 0.0) bad = true;
          sum += p;
        }
        if (bad || std::fabs(sum - 1.0) > 1e-9) {
          std::ostringstream os;
          os.precision(12);
          os << who << ": CPT row " << r << (bad ? " has a negative or non-finite entry" : " sums to ") ;
          if (!bad) os << sum;
          diags.push_back(diag_at(codes::kCpt, os.str(), a.pos));
          break;
        }
      }
    }
  }
  std::vector<int> order = topological_attrs(cls);
  if (order.size() != cls.attrs.size()) {
    std::vector<bool> placed(cls.attrs.size(), false);
    for (int i : order) placed[i] = true;
    std::vector<std::string> cyclic;
    for (size_t i = 0; i < placed.size(); ++i) {
      if (!placed[i]) cyclic.push_back(cls.attrs[i].label);
    }
    diags.push_back(diag_at(codes::kDag, cls.name + ": attributes " + join(cyclic, ", ") + " form a cycle", cls.pos));
  }
  return diags;
}

ClassRef CompiledModel::find_class(const std::string& name) const {
  auto it = classes.find(name);
  return it == classes.end() ? nullptr : it->second;
}

bool CompiledModel::is_subclass_of(const std::string& sub, const std::string& super) const {
  std::string cur = sub;
  for (size_t guard = 0; guard <= classes.size(); ++guard) {
    if (cur == super) return true;
    ClassRef c = find_class(cur);
    if (!c || c->parent.empty()) return false;
    cur = c->parent;
  }
  return false;
}

namespace {

struct Dep {
  std::string target;
  bool extends = false;
};

}  // namespace

ModelRef compile(const dsl::ModelSource& source) {
  auto model = std::make_shared<CompiledModel>();
  model->source = source;
  std::vector<Diagnostic> diags;
  model->types = build_type_table(source);
  if (!source.situation) throw Error(codes::kNoSituation, "model has no situation");

  std::map<std::string, const dsl::ClassDecl*> decls;
  for (const auto& c : source.classes) {
    if (decls.count(c.name)) {
      diags.push_back(diag_at(codes::kDuplicateName, "class '" + c.name + "' is already declared", c.pos));
      continue;
    }
    decls[c.name] = &c;
  }

  auto deps_of = [&](const dsl::ClassDecl& c) {
    std::vector<Dep> deps;
    if (!c.parent.empty()) deps.push_back({c.parent, true});
    for (const auto& m : c.members) {
      bool is_type = model->types.find(m.type) != nullptr;
      if (m.kind == dsl::AttrKind::kInput ? !is_type && decls.count(m.type) : decls.count(m.type) > 0) {
        deps.push_back({m.type, false});
      }
    }
    return deps;
  };

  // Depth-first resolution; classes on a cycle are reported once.
  enum class State { kNew, kActive, kDone, kFailed };
  std::map<std::string, State> state;
  std::vector<std::pair<std::string, bool>> stack;  // class, reached via extends
  std::function<bool(const std::string&)> visit = [&](const std::string& name) -> bool {
    State& s = state[name];
    if (s == State::kDone) return true;
    if (s == State::kFailed) return false;
    const dsl::ClassDecl& c = *decls.at(name);
    if (s == State::kActive) {
      // stack.back() is this revisit; the first occurrence opens the cycle.
      size_t start = 0;
      while (stack[start].first != name) ++start;
      std::vector<std::string> cycle;
      bool all_extends = true;
      for (size_t i = start; i < stack.size(); ++i) {
        cycle.push_back(stack[i].first);
        if (i > start && !stack[i].second) all_extends = false;
      }
      if (all_extends) {
        diags.push_back(diag_at(codes::kCycleInHierarchy, "class hierarchy cycle: " + join(cycle, " extends "), c.pos));
      } else {
        diags.push_back(diag_at(codes::kRecursion, "recursive class definition: " + join(cycle, " -> "), c.pos));
      }
      return false;
    }
    s = State::kActive;
    bool ok = true;
    for (const auto& d : deps_of(c)) {
      if (!decls.count(d.target)) {
        if (d.extends) {
          diags.push_back(diag_at(codes::kUnknownName, c.name + " extends unknown class '" + d.target + "'", c.pos));
          ok = false;
        }
        continue;
      }
      stack.emplace_back(d.target, d.extends);
      bool child_ok = visit(d.target);
      stack.pop_back();
      ok = ok && child_ok;
    }
    if (ok) {
      const ClassDef* parent = c.parent.empty() ? nullptr : model->classes.at(c.parent).get();
      try {
        ResolveContext ctx{model->types, model->classes};
        model->classes[name] = resolve_inheritance(c, parent, ctx);
      } catch (const Error& e) {
        diags.insert(diags.end(), e.diagnostics().begin(), e.diagnostics().end());
        ok = false;
      }
    }
    state[name] = ok ? State::kDone : State::kFailed;
    return ok;
  };
  for (const auto& c : source.classes) {
    if (decls.at(c.name) != &c) continue;
    model->class_order.push_back(c.name);
    stack.assign(1, {c.name, false});
    visit(c.name);
  }

  const dsl::ClassDecl& sit = *source.situation;
  for (const auto& m : sit.members) {
    if (m.kind == dsl::AttrKind::kInput) {
      diags.push_back(diag_at(codes::kTypeCompat, "the situation cannot declare inputs ('" + m.label + "')", m.pos));
    }
  }
  if (!sit.parent.empty()) {
    diags.push_back(diag_at(codes::kParse, "the situation cannot extend a class", sit.pos));
  }
  bool deps_ok = true;
  for (const auto& d : deps_of(sit)) {
    if (decls.count(d.target) && state[d.target] != State::kDone) deps_ok = false;
  }
  if (diags.empty() && deps_ok) {
    try {
      ResolveContext ctx{model->types, model->classes};
      model->situation = resolve_inheritance(sit, nullptr, ctx);
    } catch (const Error& e) {
      diags.insert(diags.end(), e.diagnostics().begin(), e.diagnostics().end());
    }
  }
  if (!diags.empty()) throw Error(std::move(diags));
  if (!model->situation) throw Error(codes::kInternal, "situation did not resolve");
  return model;
}

ModelRef compile_text(std::string_view text) { return compile(dsl::parse_model_or_throw(text)); }

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : path) {
    if (ch == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  if (!parts.empty() && parts.front() == "Situation") parts.erase(parts.begin());
  if (parts.size() == 1 && parts.front().empty()) parts.clear();
  return parts;
}

int GroundModel::find(std::string_view path) const {
  const std::string& root_label = objects.front().path;
  std::string full(path);
  if (full != root_label && full.rfind(root_label + ".", 0) != 0) full = root_label + "." + full;
  for (const auto& o : objects) {
    if (o.path == full) return o.id;
  }
  return -1;
}

std::string GroundModel::sigma_label(int id) const {
  std::string out;
  for (size_t i = 0; i < objects[id].sigma.size(); ++i) {
    out += (i ? "." : "") + std::to_string(objects[id].sigma[i]);
  }
  return out;
}

std::vector<int> GroundModel::descendants(int id) const {
  std::vector<int> out;
  std::vector<int> stack;
  for (auto it = objects[id].children.rbegin(); it != objects[id].children.rend(); ++it) stack.push_back(*it);
  while (!stack.empty()) {
    int c = stack.back();
    stack.pop_back();
    out.push_back(c);
    for (auto it = objects[c].children.rbegin(); it != objects[c].children.rend(); ++it) stack.push_back(*it);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool GroundModel::is_descendant(int id, int ancestor) const {
  for (int cur = id; cur >= 0; cur = objects[cur].container) {
    if (cur == ancestor) return true;
  }
  return false;
}

namespace {

// Applies class overrides below `rel`, returning a (possibly shared) class
// whose complex attributes carry the substituted classes. Every modified
// class is revalidated so that type-incompatible substitutions surface.
ClassRef effective_class(const ClassRef& cls, const std::string& rel, const ClassOverrides& overrides,
                         const CoarseningSet& maps, std::set<std::string>& used) {
  bool any = false;
  for (const auto& [path, c] : overrides) {
    if (rel.empty() || path.rfind(rel + ".", 0) == 0) {
      any = true;
      break;
    }
  }
  if (!any) return cls;
  auto copy = std::make_shared<ClassDef>(*cls);
  bool changed = false;
  for (auto& a : copy->attrs) {
    if (a.simple()) continue;
    const std::string path = rel.empty() ? a.label : rel + "." + a.label;
    ClassRef base = a.cls;
    auto it = overrides.find(path);
    if (it != overrides.end()) {
      base = it->second;
      used.insert(path);
    }
    ClassRef eff = effective_class(base, path, overrides, maps, used);
    if (eff == a.cls) continue;
    changed = true;
    a.cls = eff;
    for (auto& b : a.bindings) {
      if (const InputAttr* in = eff->input(b.slot)) b.slot_type = in->type;
    }
  }
  if (!changed) return cls;
  std::vector<Diagnostic> diags = validate_class(*copy, maps);
  if (!diags.empty()) {
    std::string msg = "substitution inside " + (rel.empty() ? std::string("Situation") : rel) + " is not type-compatible";
    for (const auto& d : diags) msg += "; " + d.message;
    throw Error(codes::kTypeCompat, msg);
  }
  return copy;
}

GroundModel unroll(const ClassRef& root_cls, const std::string& root_label, std::shared_ptr<const CoarseningSet> maps) {
  GroundModel gm;
  gm.maps = std::move(maps);
  GroundObject root;
  root.id = 0;
  root.path = root_label;
  root.label = root_label;
  root.cls = root_cls;
  root.sigma = {1};
  gm.objects.push_back(std::move(root));

  std::vector<std::string> lineage;
  std::function<void(int)> expand = [&](int id) {
    ClassRef cls = gm.objects[id].cls;
    if (std::find(lineage.begin(), lineage.end(), cls->name) != lineage.end()) {
      throw Error(codes::kRecursion, "class " + cls->name + " contains itself at " + gm.objects[id].path);
    }
    lineage.push_back(cls->name);
    gm.objects[id].children.assign(cls->attrs.size(), -1);
    int k = 1;
    for (int i : topological_attrs(*cls)) {
      const ValueAttr& a = cls->attrs[i];
      GroundObject child;
      child.id = static_cast<int>(gm.objects.size());
      child.path = gm.objects[id].path + "." + a.label;
      child.label = a.label;
      child.container = id;
      child.attr_index = i;
      child.cls = a.cls;
      child.container_cls = cls;
      child.sigma = gm.objects[id].sigma;
      child.sigma.push_back(k++);
      gm.objects[id].children[i] = child.id;
      int cid = child.id;
      gm.objects.push_back(std::move(child));
      if (!a.simple()) expand(cid);
    }
    lineage.pop_back();
  };
  expand(0);
  return gm;
}

}  // namespace

GroundModel instantiate(const CompiledModel& model, const ClassOverrides& overrides) {
  std::set<std::string> used;
  ClassRef root = effective_class(model.situation, "", overrides, model.maps(), used);
  for (const auto& [path, cls] : overrides) {
    if (!used.count(path)) throw Error(codes::kUnknownPath, "no complex object at '" + path + "'");
  }
  return unroll(root, "Situation", model.types.maps);
}

GroundModel instantiate_class(const ClassRef& cls, std::shared_ptr<const CoarseningSet> maps) {
  GroundModel gm = unroll(cls, cls->name, std::move(maps));
  gm.free_root_inputs = true;
  return gm;
}

}  // namespace oobn
