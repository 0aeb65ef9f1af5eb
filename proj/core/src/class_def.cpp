#include "oobn/class_def.hpp"

#include <algorithm>

namespace oobn {

const SlotBinding* ValueAttr::binding(std::string_view slot) const {
  for (const auto& b : bindings) {
    if (b.slot == slot) return &b;
  }
  return nullptr;
}

const InputAttr* ClassDef::input(std::string_view label) const {
  for (const auto& i : inputs) {
    if (i.label == label) return &i;
  }
  return nullptr;
}

const ValueAttr* ClassDef::attr(std::string_view label) const {
  int i = attr_index(label);
  return i < 0 ? nullptr : &attrs[i];
}

int ClassDef::attr_index(std::string_view label) const {
  for (size_t i = 0; i < attrs.size(); ++i) {
    if (attrs[i].label == label) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> ClassDef::output_labels() const {
  std::vector<std::string> out;
  for (const auto& a : attrs) {
    if (a.output) out.push_back(a.label);
  }
  return out;
}

std::vector<std::string> ClassDef::dag_parents(const ValueAttr& attr) const {
  std::vector<std::string> out;
  auto add = [&](const std::string& p) {
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  };
  for (const auto& b : attr.bindings) {
    if (!b.chain.empty()) add(b.chain.front());
  }
  for (const auto& p : attr.extra_parents) add(p);
  return out;
}

TypeRef attr_output_type(const ValueAttr& attr) {
  return attr.simple() ? attr.type : output_type(*attr.cls);
}

TypeRef output_type(const ClassDef& cls) {
  std::vector<Field> fields;
  for (const auto& a : cls.attrs) {
    if (a.output) fields.push_back({a.label, attr_output_type(a)});
  }
  return TypeDef::structured(cls.name, std::move(fields));
}

TypeRef value_type(const ClassDef& cls) {
  std::vector<Field> fields;
  for (const auto& a : cls.attrs) {
    fields.push_back({a.label, a.simple() ? a.type : value_type(*a.cls)});
  }
  return TypeDef::structured(cls.name, std::move(fields));
}

InterfaceType interface_type(const ClassDef& cls) {
  InterfaceType t;
  for (const auto& i : cls.inputs) t.inputs.emplace_back(i.label, i.type);
  for (const auto& a : cls.attrs) {
    if (a.output) t.outputs.emplace_back(a.label, attr_output_type(a));
  }
  return t;
}

TypeRef chain_type(const ClassDef& cls, const std::vector<std::string>& chain, std::string* why) {
  auto fail = [&](std::string reason) -> TypeRef {
    if (why) *why = std::move(reason);
    return nullptr;
  };
  if (chain.empty()) return fail("empty chain");
  TypeRef t;
  if (const InputAttr* in = cls.input(chain[0])) {
    t = in->type;
  } else if (const ValueAttr* a = cls.attr(chain[0])) {
    t = attr_output_type(*a);
  } else {
    return fail("'" + chain[0] + "' is not an attribute of " + cls.name);
  }
  for (size_t i = 1; i < chain.size(); ++i) {
    if (t->is_basic()) return fail("'" + chain[i - 1] + "' is basic and has no attribute '" + chain[i] + "'");
    const Field* f = t->field(chain[i]);
    if (!f) return fail("'" + chain[i] + "' is not a visible attribute of '" + chain[i - 1] + "'");
    t = f->type;
  }
  return t;
}

size_t cpt_rows(const ValueAttr& attr) {
  size_t rows = 1;
  for (const auto& b : attr.bindings) rows *= static_cast<size_t>(b.slot_type->size());
  return rows;
}

dsl::ClassDecl to_decl(const ClassDef& cls) {
  dsl::ClassDecl decl;
  decl.name = cls.name;
  decl.parent = cls.parent;
  for (const auto& in : cls.inputs) {
    dsl::AttrDecl a;
    a.kind = dsl::AttrKind::kInput;
    a.label = in.label;
    a.type = in.type->name();
    decl.members.push_back(std::move(a));
  }
  for (const auto& v : cls.attrs) {
    dsl::AttrDecl a;
    a.kind = v.output ? dsl::AttrKind::kOutput : dsl::AttrKind::kPrivate;
    a.label = v.label;
    a.type = v.simple() ? v.type->name() : v.cls->name;
    a.has_bindings = true;
    for (const auto& b : v.bindings) {
      a.bindings.push_back({b.slot, v.simple() ? b.slot_type->name() : std::string(), b.chain, {}});
    }
    a.parents = v.extra_parents;
    if (v.simple()) {
      a.has_cpt = true;
      const size_t k = static_cast<size_t>(v.type->size());
      const size_t rows = cpt_rows(v);
      std::vector<int> digits(v.bindings.size(), 0);
      for (size_t r = 0; r < rows; ++r) {
        dsl::CptRow row;
        for (size_t s = 0; s < v.bindings.size(); ++s) {
          row.key.push_back(v.bindings[s].slot_type->values()[digits[s]]);
        }
        row.probs.assign(v.cpt.begin() + static_cast<long>(r * k), v.cpt.begin() + static_cast<long>((r + 1) * k));
        a.rows.push_back(std::move(row));
        for (int s = static_cast<int>(digits.size()) - 1; s >= 0; --s) {
          if (++digits[s] < v.bindings[s].slot_type->size()) break;
          digits[s] = 0;
        }
      }
    }
    decl.members.push_back(std::move(a));
  }
  return decl;
}

}  // namespace oobn
