#include "oobn/typesys.hpp"

#include <algorithm>
#include <functional>

#include "oobn/model.hpp"

namespace oobn {

namespace {

bool is_infinite_name(const std::string& name) {
  static const char* const kNames[] = {"Integer", "Integers", "Int", "Real", "Reals", "Float", "Natural"};
  return std::any_of(std::begin(kNames), std::end(kNames), [&](const char* n) { return name == n; });
}

Diagnostic diag_at(const char* code, std::string message, const dsl::SourcePos& pos) {
  return Diagnostic{code, std::move(message), pos.line, pos.column};
}

std::string binding_text(const std::string& attr, const std::string& slot, const std::vector<std::string>& chain) {
  std::string out = attr + "." + slot + " <- ";
  for (size_t i = 0; i < chain.size(); ++i) out += (i ? "." : "") + chain[i];
  return out;
}

}  // namespace

TypeRef TypeTable::find(const std::string& name) const {
  auto it = types.find(name);
  return it == types.end() ? nullptr : it->second;
}

TypeTable build_type_table(const dsl::ModelSource& source) {
  TypeTable table;
  std::vector<Diagnostic> diags;
  table.types["Boolean"] = boolean_type();

  std::map<std::string, const dsl::TypeDecl*> decls;
  for (const auto& t : source.types) {
    if (is_infinite_name(t.name)) {
      diags.push_back(diag_at(codes::kInfiniteType, "type name '" + t.name + "' is reserved for an infinite type", t.pos));
      continue;
    }
    if (t.name == "Boolean" || decls.count(t.name)) {
      diags.push_back(diag_at(codes::kDuplicateName, "type '" + t.name + "' is already declared", t.pos));
      continue;
    }
    decls[t.name] = &t;
  }

  std::set<std::string> active;
  std::set<std::string> failed;
  std::function<TypeRef(const std::string&, const dsl::SourcePos&)> resolve =
      [&](const std::string& name, const dsl::SourcePos& use) -> TypeRef {
    if (TypeRef t = table.find(name)) return t;
    if (failed.count(name)) return nullptr;
    if (is_infinite_name(name)) {
      diags.push_back(diag_at(codes::kInfiniteType, "'" + name + "' is an infinite type; use a finite enumeration", use));
      return nullptr;
    }
    auto it = decls.find(name);
    if (it == decls.end()) {
      diags.push_back(diag_at(codes::kUnknownName, "unknown type '" + name + "'", use));
      return nullptr;
    }
    const dsl::TypeDecl& d = *it->second;
    if (active.count(name)) {
      diags.push_back(diag_at(codes::kRecursion, "structured type '" + name + "' contains itself", d.pos));
      failed.insert(name);
      return nullptr;
    }
    TypeRef result;
    if (d.kind == dsl::TypeDecl::Kind::kEnum) {
      if (d.values.empty()) {
        diags.push_back(diag_at(codes::kParse, "type '" + name + "' has no values", d.pos));
      } else {
        result = TypeDef::basic(name, d.values);
      }
    } else {
      active.insert(name);
      std::vector<Field> fields;
      bool ok = true;
      for (const auto& [label, tname] : d.fields) {
        TypeRef ft = resolve(tname, d.pos);
        if (!ft) {
          ok = false;
          continue;
        }
        fields.push_back({label, ft});
      }
      active.erase(name);
      if (ok) result = TypeDef::structured(name, std::move(fields));
    }
    if (result) {
      table.types[name] = result;
    } else {
      failed.insert(name);
    }
    return result;
  };
  for (const auto& t : source.types) {
    if (decls.count(t.name) && decls[t.name] == &t) resolve(t.name, t.pos);
  }

  for (const auto& m : source.maps) {
    TypeRef from = resolve(m.from, m.pos);
    TypeRef to = resolve(m.to, m.pos);
    if (!from || !to) continue;
    if (!from->is_basic() || !to->is_basic()) {
      diags.push_back(diag_at(codes::kBadMap, "map " + m.from + " -> " + m.to + " must relate two basic types", m.pos));
      continue;
    }
    CoarseningMap cm{from, to, std::vector<int>(from->values().size(), -1)};
    bool ok = true;
    for (const auto& [a, b] : m.pairs) {
      int ia = from->value_index(a);
      int ib = to->value_index(b);
      if (ia < 0 || ib < 0) {
        diags.push_back(diag_at(codes::kBadMap,
                                "map " + m.from + " -> " + m.to + ": unknown value '" + (ia < 0 ? a : b) + "'", m.pos));
        ok = false;
        continue;
      }
      if (cm.image[ia] >= 0 && cm.image[ia] != ib) {
        diags.push_back(diag_at(codes::kBadMap, "map " + m.from + " -> " + m.to + ": '" + a + "' is mapped twice", m.pos));
        ok = false;
      }
      cm.image[ia] = ib;
    }
    if (!ok) continue;
    try {
      table.maps->add(std::move(cm));
    } catch (const Error& e) {
      diags.push_back(diag_at(codes::kBadMap, e.diagnostics().front().message, m.pos));
    }
  }
  if (!diags.empty()) throw Error(std::move(diags));
  return table;
}

TypeRef resolve_input_type(const std::string& name, const ResolveContext& ctx, const dsl::SourcePos& pos,
                           std::vector<Diagnostic>& diags) {
  if (is_infinite_name(name)) {
    diags.push_back(diag_at(codes::kInfiniteType, "'" + name + "' is an infinite type; use a finite enumeration", pos));
    return nullptr;
  }
  if (TypeRef t = ctx.types.find(name)) return t;
  auto it = ctx.classes.find(name);
  if (it != ctx.classes.end()) return output_type(*it->second);
  diags.push_back(diag_at(codes::kUnknownName, "unknown type '" + name + "'", pos));
  return nullptr;
}

std::set<std::string> required_inputs(const ClassDef& cls, const std::vector<std::string>& outs) {
  std::set<std::string> seen;
  std::set<std::string> inputs;
  std::vector<std::string> stack(outs.begin(), outs.end());
  while (!stack.empty()) {
    std::string label = stack.back();
    stack.pop_back();
    if (!seen.insert(label).second) continue;
    if (cls.input(label)) {
      inputs.insert(label);
      continue;
    }
    if (const ValueAttr* a = cls.attr(label)) {
      for (auto& p : cls.dag_parents(*a)) stack.push_back(p);
    }
  }
  return inputs;
}

InterfaceType projected_interface(const ClassDef& cls, const std::vector<std::string>& outs) {
  InterfaceType t;
  for (const auto& o : outs) {
    const ValueAttr* a = cls.attr(o);
    if (!a || !a->output) throw Error(codes::kUnknownOutput, "'" + o + "' is not an output of " + cls.name);
    t.outputs.emplace_back(o, attr_output_type(*a));
  }
  std::set<std::string> req = required_inputs(cls, outs);
  for (const auto& in : cls.inputs) {
    if (req.count(in.label)) t.inputs.emplace_back(in.label, in.type);
  }
  return t;
}

std::vector<Diagnostic> check_subclass(const ClassDef& sub, const ClassDef& super, const CoarseningSet& maps) {
  std::vector<Diagnostic> diags;
  std::vector<std::string> outs = super.output_labels();
  for (const auto& o : outs) {
    const ValueAttr* a = sub.attr(o);
    if (!a || !a->output) {
      diags.push_back(diag_at(codes::kMissingOutput,
                              sub.name + " does not provide output '" + o + "' of " + super.name, sub.pos));
    }
  }
  if (!diags.empty()) return diags;
  InterfaceType projected = projected_interface(sub, outs);
  if (auto why = interface_violation(projected, interface_type(super), maps)) {
    diags.push_back(diag_at(codes::kInterfaceMismatch, sub.name + " is not a subclass of " + super.name + ": " + *why,
                            sub.pos));
  }
  return diags;
}

namespace {

// Builds a dense CPT from literal rows keyed by slot values.
std::vector<double> build_cpt(const ValueAttr& attr, const std::vector<dsl::CptRow>& rows,
                              std::vector<Diagnostic>& diags) {
  const size_t k = static_cast<size_t>(attr.type->size());
  const size_t nrows = cpt_rows(attr);
  std::vector<double> table(nrows * k, 0.0);
  std::vector<bool> filled(nrows, false);
  const dsl::CptRow* fallback = nullptr;
  bool ok = true;
  auto fail = [&](const std::string& msg, const dsl::SourcePos& pos) {
    diags.push_back(diag_at(codes::kCpt, attr.label + ": " + msg, pos));
    ok = false;
  };
  for (const auto& row : rows) {
    if (row.probs.size() != k) {
      fail("row has " + std::to_string(row.probs.size()) + " entries, expected " + std::to_string(k), row.pos);
      continue;
    }
    if (row.is_default) {
      if (fallback) fail("more than one default row", row.pos);
      fallback = &row;
      continue;
    }
    if (row.key.size() != attr.bindings.size()) {
      fail("row key has " + std::to_string(row.key.size()) + " values, expected " +
               std::to_string(attr.bindings.size()),
           row.pos);
      continue;
    }
    size_t index = 0;
    bool key_ok = true;
    for (size_t s = 0; s < row.key.size(); ++s) {
      const TypeRef& st = attr.bindings[s].slot_type;
      int v = st->value_index(row.key[s]);
      if (v < 0) {
        fail("'" + row.key[s] + "' is not a value of " + st->name(), row.pos);
        key_ok = false;
        break;
      }
      index = index * static_cast<size_t>(st->size()) + static_cast<size_t>(v);
    }
    if (!key_ok) continue;
    if (filled[index]) {
      fail("duplicate row", row.pos);
      continue;
    }
    filled[index] = true;
    std::copy(row.probs.begin(), row.probs.end(), table.begin() + static_cast<long>(index * k));
  }
  for (size_t r = 0; r < nrows && ok; ++r) {
    if (filled[r]) continue;
    if (!fallback) {
      fail("missing CPT row " + std::to_string(r) + " and no default row", attr.pos);
      break;
    }
    std::copy(fallback->probs.begin(), fallback->probs.end(), table.begin() + static_cast<long>(r * k));
  }
  return ok ? table : std::vector<double>{};
}

bool same_slots(const ValueAttr& a, const ValueAttr& b) {
  if (a.bindings.size() != b.bindings.size()) return false;
  for (size_t i = 0; i < a.bindings.size(); ++i) {
    if (a.bindings[i].slot != b.bindings[i].slot) return false;
    if (!types_equal(*a.bindings[i].slot_type, *b.bindings[i].slot_type)) return false;
  }
  return true;
}

}  // namespace

ClassRef resolve_inheritance(const dsl::ClassDecl& decl, const ClassDef* parent, const ResolveContext& ctx) {
  std::vector<Diagnostic> diags;
  auto cls = std::make_shared<ClassDef>();
  cls->name = decl.name;
  cls->pos = decl.pos;
  if (parent) {
    cls->parent = parent->name;
    cls->inputs = parent->inputs;
    cls->attrs = parent->attrs;
  }
  const CoarseningSet& maps = *ctx.types.maps;

  // Inputs first: value attributes may infer slot types from them.
  for (const auto& m : decl.members) {
    if (m.kind != dsl::AttrKind::kInput) continue;
    TypeRef t = resolve_input_type(m.type, ctx, m.pos, diags);
    if (!t) continue;
    if (cls->attr(m.label)) {
      diags.push_back(diag_at(codes::kOverrideType, "'" + m.label + "' is inherited as a value attribute", m.pos));
      continue;
    }
    auto it = std::find_if(cls->inputs.begin(), cls->inputs.end(), [&](const InputAttr& i) { return i.label == m.label; });
    if (it == cls->inputs.end()) {
      cls->inputs.push_back({m.label, t});
      continue;
    }
    if (!is_value_subtype(*it->type, *t, maps)) {
      diags.push_back(diag_at(codes::kOverrideType,
                              "input '" + m.label + "' narrowed from " + it->type->name() + " to " + t->name(), m.pos));
      continue;
    }
    it->type = t;
  }

  // Value attributes: place types, then bindings and CPTs once every
  // sibling type is known.
  std::vector<std::pair<const dsl::AttrDecl*, int>> declared;
  std::map<int, ValueAttr> previous;
  for (const auto& m : decl.members) {
    if (m.kind == dsl::AttrKind::kInput) continue;
    ValueAttr v;
    v.label = m.label;
    v.output = m.kind == dsl::AttrKind::kOutput;
    v.pos = m.pos;
    if (is_infinite_name(m.type)) {
      diags.push_back(diag_at(codes::kInfiniteType, "'" + m.type + "' is an infinite type; use a finite enumeration", m.pos));
      continue;
    }
    auto cit = ctx.classes.find(m.type);
    if (cit != ctx.classes.end()) {
      v.cls = cit->second;
    } else if (TypeRef t = ctx.types.find(m.type)) {
      if (!t->is_basic()) {
        diags.push_back(diag_at(codes::kUnknownName,
                                "'" + m.type + "' is a structured type; value attributes need a basic type or a class",
                                m.pos));
        continue;
      }
      v.type = t;
    } else {
      diags.push_back(diag_at(codes::kUnknownName, "unknown class or type '" + m.type + "'", m.pos));
      continue;
    }
    if (cls->input(m.label)) {
      diags.push_back(diag_at(codes::kOverrideType, "'" + m.label + "' is inherited as an input", m.pos));
      continue;
    }
    int index = cls->attr_index(m.label);
    if (index >= 0) {
      const ValueAttr& old = cls->attrs[index];
      if (old.output && v.output && !is_value_subtype(*attr_output_type(v), *attr_output_type(old), maps)) {
        diags.push_back(diag_at(codes::kOverrideType,
                                "output '" + m.label + "' overridden with " + attr_output_type(v)->describe() +
                                    ", not a subtype of " + attr_output_type(old)->describe(),
                                m.pos));
        continue;
      }
      previous[index] = old;
      cls->attrs[index] = std::move(v);
    } else {
      index = static_cast<int>(cls->attrs.size());
      cls->attrs.push_back(std::move(v));
    }
    declared.emplace_back(&m, index);
  }

  for (const auto& [m, index] : declared) {
    ValueAttr& v = cls->attrs[index];
    const ValueAttr* old = previous.count(index) ? &previous[index] : nullptr;
    bool slots_ok = true;
    if (m->has_bindings) {
      for (const auto& b : m->bindings) {
        SlotBinding sb{b.slot, nullptr, b.chain};
        if (!v.simple()) {
          if (const InputAttr* in = v.cls->input(b.slot)) {
            sb.slot_type = in->type;
          } else {
            diags.push_back(diag_at(codes::kAnnotType, "'" + b.slot + "' is not an input of " + v.cls->name, b.pos));
            slots_ok = false;
            continue;
          }
        } else if (!b.type.empty()) {
          sb.slot_type = resolve_input_type(b.type, ctx, b.pos, diags);
        } else {
          std::string why;
          sb.slot_type = chain_type(*cls, b.chain, &why);
          if (!sb.slot_type) {
            diags.push_back(diag_at(codes::kAnnotType, binding_text(v.label, b.slot, b.chain) + ": " + why, b.pos));
          }
        }
        if (!sb.slot_type) {
          slots_ok = false;
          continue;
        }
        if (v.simple() && !sb.slot_type->is_basic()) {
          diags.push_back(diag_at(codes::kAnnotType,
                                  binding_text(v.label, b.slot, b.chain) + ": input of a simple attribute must be basic, got " +
                                      sb.slot_type->describe(),
                                  b.pos));
          slots_ok = false;
          continue;
        }
        v.bindings.push_back(std::move(sb));
      }
      v.extra_parents = m->parents;
    } else if (old) {
      v.extra_parents = m->parents.empty() ? old->extra_parents : m->parents;
      for (const auto& b : old->bindings) {
        SlotBinding sb = b;
        if (!v.simple()) {
          const InputAttr* in = v.cls->input(b.slot);
          if (!in) {
            diags.push_back(diag_at(codes::kAnnotType,
                                    "inherited annotation '" + b.slot + "' is not an input of " + v.cls->name, m->pos));
            slots_ok = false;
            continue;
          }
          sb.slot_type = in->type;
        }
        v.bindings.push_back(std::move(sb));
      }
    } else {
      v.extra_parents = m->parents;
    }
    if (!v.simple()) {
      if (m->has_cpt) diags.push_back(diag_at(codes::kCpt, "'" + v.label + "' is complex and takes no CPT", m->pos));
      continue;
    }
    if (!slots_ok) continue;
    if (m->has_cpt) {
      v.cpt = build_cpt(v, m->rows, diags);
    } else if (old && old->simple() && types_equal(*old->type, *v.type) && same_slots(*old, v)) {
      v.cpt = old->cpt;
    } else {
      diags.push_back(diag_at(codes::kCpt, "'" + v.label + "' has no CPT", m->pos));
    }
  }

  if (!diags.empty()) throw Error(std::move(diags));
  diags = validate_class(*cls, maps);
  if (diags.empty() && parent) diags = check_subclass(*cls, *parent, maps);
  if (!diags.empty()) throw Error(std::move(diags));
  return cls;
}

}  // namespace oobn
