#include "oobn/types.hpp"

#include <set>

#include "oobn/error.hpp"

namespace oobn {

TypeRef TypeDef::basic(std::string name, std::vector<std::string> values) {
  auto t = std::shared_ptr<TypeDef>(new TypeDef());
  t->kind_ = Kind::kBasic;
  t->name_ = std::move(name);
  t->values_ = std::move(values);
  return t;
}

TypeRef TypeDef::structured(std::string name, std::vector<Field> fields) {
  auto t = std::shared_ptr<TypeDef>(new TypeDef());
  t->kind_ = Kind::kStructured;
  t->name_ = std::move(name);
  t->fields_ = std::move(fields);
  return t;
}

int TypeDef::value_index(std::string_view value) const {
  for (size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] == value) return static_cast<int>(i);
  }
  return -1;
}

const Field* TypeDef::field(std::string_view label) const {
  for (const auto& f : fields_) {
    if (f.label == label) return &f;
  }
  return nullptr;
}

std::string TypeDef::describe() const {
  std::string out;
  if (is_basic()) {
    out = name_ + "{";
    for (size_t i = 0; i < values_.size(); ++i) out += (i ? "," : "") + values_[i];
    return out + "}";
  }
  out = "<";
  for (size_t i = 0; i < fields_.size(); ++i) {
    out += (i ? ", " : "") + fields_[i].label + ":" + fields_[i].type->describe();
  }
  return out + ">";
}

const TypeRef& boolean_type() {
  static const TypeRef t = TypeDef::basic("Boolean", {"true", "false"});
  return t;
}

void CoarseningSet::add(CoarseningMap map) {
  const std::string label = map.from->name() + " -> " + map.to->name();
  if (!map.from->is_basic() || !map.to->is_basic()) {
    throw Error(codes::kBadMap, "map " + label + " must relate two basic types");
  }
  if (map.image.size() != map.from->values().size()) {
    throw Error(codes::kBadMap, "map " + label + " is not total");
  }
  std::vector<bool> hit(map.to->values().size(), false);
  for (int v : map.image) {
    if (v < 0 || v >= map.to->size()) throw Error(codes::kBadMap, "map " + label + " is not total");
    hit[v] = true;
  }
  for (size_t i = 0; i < hit.size(); ++i) {
    if (!hit[i]) {
      throw Error(codes::kBadMap, "map " + label + " is not surjective: nothing maps to '" +
                                      map.to->values()[i] + "'");
    }
  }
  auto key = std::make_pair(map.from->name(), map.to->name());
  if (key.first == key.second) return;  // reflexive pairs are implicit
  maps_.emplace(std::move(key), std::move(map));
  close();
}

void CoarseningSet::close() {
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<CoarseningMap> added;
    for (const auto& [ab, f] : maps_) {
      for (const auto& [bc, g] : maps_) {
        if (ab.second != bc.first || ab.first == bc.second) continue;
        auto key = std::make_pair(ab.first, bc.second);
        if (maps_.count(key)) continue;
        CoarseningMap composite{f.from, g.to, {}};
        for (int v : f.image) composite.image.push_back(g.image[v]);
        added.push_back(std::move(composite));
      }
    }
    for (auto& m : added) {
      auto key = std::make_pair(m.from->name(), m.to->name());
      if (maps_.emplace(std::move(key), std::move(m)).second) changed = true;
    }
  }
}

const CoarseningMap* CoarseningSet::find(const std::string& from, const std::string& to) const {
  auto it = maps_.find({from, to});
  return it == maps_.end() ? nullptr : &it->second;
}

std::vector<int> CoarseningSet::value_map(const TypeDef& from, const TypeDef& to) const {
  if (types_equal(from, to)) {
    std::vector<int> id(from.values().size());
    for (size_t i = 0; i < id.size(); ++i) id[i] = static_cast<int>(i);
    return id;
  }
  if (const CoarseningMap* m = find(from.name(), to.name())) return m->image;
  return {};
}

bool types_equal(const TypeDef& a, const TypeDef& b) {
  if (a.kind() != b.kind()) return false;
  if (a.is_basic()) return a.name() == b.name() && a.values() == b.values();
  if (a.fields().size() != b.fields().size()) return false;
  for (const auto& f : a.fields()) {
    const Field* g = b.field(f.label);
    if (!g || !types_equal(*f.type, *g->type)) return false;
  }
  return true;
}

bool is_value_subtype(const TypeDef& sub, const TypeDef& super, const CoarseningSet& maps) {
  if (sub.kind() != super.kind()) return false;
  if (sub.is_basic()) {
    if (types_equal(sub, super)) return true;
    return maps.find(sub.name(), super.name()) != nullptr;
  }
  for (const auto& f : super.fields()) {
    const Field* g = sub.field(f.label);
    if (!g || !is_value_subtype(*g->type, *f.type, maps)) return false;
  }
  return true;
}

std::string InterfaceType::describe() const {
  std::string out = "<";
  for (size_t i = 0; i < inputs.size(); ++i) {
    out += (i ? ", " : "") + inputs[i].first + ":" + inputs[i].second->name();
  }
  out += " -> ";
  for (size_t i = 0; i < outputs.size(); ++i) {
    out += (i ? ", " : "") + outputs[i].first + ":" + outputs[i].second->name();
  }
  return out + ">";
}

std::optional<std::string> interface_violation(const InterfaceType& sub, const InterfaceType& super,
                                               const CoarseningSet& maps) {
  auto lookup = [](const auto& list, const std::string& label) -> const TypeRef* {
    for (const auto& [l, t] : list) {
      if (l == label) return &t;
    }
    return nullptr;
  };
  for (const auto& [label, type] : super.outputs) {
    const TypeRef* mine = lookup(sub.outputs, label);
    if (!mine) return "output '" + label + "' is missing";
    if (!is_value_subtype(**mine, *type, maps)) {
      return "output '" + label + "' has type " + (*mine)->describe() + ", not a subtype of " +
             type->describe();
    }
  }
  for (const auto& [label, type] : sub.inputs) {
    const TypeRef* theirs = lookup(super.inputs, label);
    if (!theirs) return "input '" + label + "' is not supplied to the supertype";
    if (!is_value_subtype(**theirs, *type, maps)) {
      return "input '" + label + "' expects " + type->describe() + ", but the supertype supplies " +
             (*theirs)->describe();
    }
  }
  return std::nullopt;
}

}  // namespace oobn
