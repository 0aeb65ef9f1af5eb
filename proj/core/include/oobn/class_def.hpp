#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "oobn/dsl.hpp"
#include "oobn/types.hpp"

namespace oobn {

struct ClassDef;
using ClassRef = std::shared_ptr<const ClassDef>;

// Annotation A.I <- B.rho for one input slot I of a value attribute A.
// chain[0] is B (an input or value attribute of the enclosing class).
struct SlotBinding {
  std::string slot;
  TypeRef slot_type;
  std::vector<std::string> chain;
};

struct InputAttr {
  std::string label;
  TypeRef type;
};

struct ValueAttr {
  std::string label;
  bool output = false;

  // Simple attributes carry a basic type and a CPT; complex ones a class.
  TypeRef type;
  ClassRef cls;

  std::vector<SlotBinding> bindings;
  std::vector<std::string> extra_parents;

  // Row-major over the slot values (binding order), child value last.
  std::vector<double> cpt;

  dsl::SourcePos pos;

  bool simple() const { return cls == nullptr; }
  const SlotBinding* binding(std::string_view slot) const;
};

// A resolved class: inheritance applied, names bound, CPTs materialized.
struct ClassDef {
  std::string name;
  std::string parent;
  // Set on iconized classes: the class whose interface distribution this
  // class reproduces.
  std::string iconized_from;
  std::vector<InputAttr> inputs;
  std::vector<ValueAttr> attrs;
  dsl::SourcePos pos;

  const InputAttr* input(std::string_view label) const;
  const ValueAttr* attr(std::string_view label) const;
  int attr_index(std::string_view label) const;

  std::vector<std::string> output_labels() const;

  // DAG parents of a value attribute: chain heads of its bindings plus any
  // explicitly declared parents, deduplicated in first-use order.
  std::vector<std::string> dag_parents(const ValueAttr& attr) const;
};

// Type of the visible part of an object of this class (outputs only) and of
// its full value (all value attributes).
TypeRef output_type(const ClassDef& cls);
TypeRef value_type(const ClassDef& cls);

// Output type of a value attribute: its basic type, or its class's output type.
TypeRef attr_output_type(const ValueAttr& attr);

InterfaceType interface_type(const ClassDef& cls);

// Type denoted by a binding chain evaluated inside `cls`; nullptr when the
// chain does not resolve. `why` receives a reason on failure.
TypeRef chain_type(const ClassDef& cls, const std::vector<std::string>& chain, std::string* why = nullptr);

// Number of CPT rows (product of slot domain sizes).
size_t cpt_rows(const ValueAttr& attr);

// Dense DSL declaration for a resolved class (used to render derived
// classes such as iconized ones).
dsl::ClassDecl to_decl(const ClassDef& cls);

}  // namespace oobn
