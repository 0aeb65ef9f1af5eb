#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "oobn/class_def.hpp"
#include "oobn/dsl.hpp"
#include "oobn/error.hpp"
#include "oobn/typesys.hpp"

namespace oobn {

// Checks the structural invariants of a resolved class: acyclic DAG,
// annotation types, every declared parent used, normalized CPTs.
std::vector<Diagnostic> validate_class(const ClassDef& cls, const CoarseningSet& maps);

// A parsed, resolved and validated model. Immutable once built.
struct CompiledModel {
  dsl::ModelSource source;
  TypeTable types;
  std::map<std::string, ClassRef> classes;  // by name, excluding the situation
  std::vector<std::string> class_order;     // declaration order
  ClassRef situation;

  ClassRef find_class(const std::string& name) const;
  const CoarseningSet& maps() const { return *types.maps; }

  // Declared is-a relation (reflexive and transitive over `extends`).
  bool is_subclass_of(const std::string& sub, const std::string& super) const;
};

using ModelRef = std::shared_ptr<const CompiledModel>;

// Throws oobn::Error carrying all diagnostics.
ModelRef compile(const dsl::ModelSource& source);
ModelRef compile_text(std::string_view text);

// One node of the unrolled object tree. Simple objects are leaves.
struct GroundObject {
  int id = 0;
  std::string path;   // root-relative, e.g. "Situation.Car.Engine"
  std::string label;  // attribute label ("Situation" for the root)
  int container = -1;
  int attr_index = -1;    // index into the container's class attributes
  ClassRef cls;           // null for simple objects
  ClassRef container_cls;  // class holding this object's declaration
  std::vector<int> sigma;    // lexicographic label, root = {1}
  std::vector<int> children;  // by attribute index of cls; empty for simple

  bool simple() const { return cls == nullptr; }
  const ValueAttr& spec() const { return container_cls->attrs[attr_index]; }
};

// Fully unrolled object tree rooted at the situation (or at a class, for
// per-class analysis where the root's inputs stay free).
struct GroundModel {
  std::vector<GroundObject> objects;  // objects[0] is the root; preorder by sigma
  std::shared_ptr<const CoarseningSet> maps;
  bool free_root_inputs = false;

  const GroundObject& root() const { return objects.front(); }
  int find(std::string_view path) const;  // -1 when absent
  std::string sigma_label(int id) const;   // "1.2.3"
  // Objects strictly inside `id` (descendants), preorder.
  std::vector<int> descendants(int id) const;
  bool is_descendant(int id, int ancestor) const;  // reflexive
};

// Class substitutions by root-relative object path (without the leading
// "Situation."), applied before unrolling.
using ClassOverrides = std::map<std::string, ClassRef>;

// Throws E_RECURSION, E_TYPE_COMPAT, E_UNKNOWN_PATH.
GroundModel instantiate(const CompiledModel& model, const ClassOverrides& overrides = {});

// Unrolls a single class; its inputs remain free.
GroundModel instantiate_class(const ClassRef& cls, std::shared_ptr<const CoarseningSet> maps);

// Value attributes of `cls` in a DAG-consistent order, ties broken by
// declaration order. Indices into cls.attrs.
std::vector<int> topological_attrs(const ClassDef& cls);

// Normalizes a user path: strips a leading "Situation." and splits on '.'.
std::vector<std::string> split_path(std::string_view path);

}  // namespace oobn
