#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "oobn/class_def.hpp"
#include "oobn/dsl.hpp"
#include "oobn/error.hpp"
#include "oobn/types.hpp"

namespace oobn {

// Named types plus the closed set of coarsening maps of one model.
struct TypeTable {
  std::map<std::string, TypeRef> types;
  std::shared_ptr<CoarseningSet> maps = std::make_shared<CoarseningSet>();

  TypeRef find(const std::string& name) const;
};

// Builds the type table from declarations. Throws with every diagnostic.
TypeTable build_type_table(const dsl::ModelSource& source);

// Name lookup used while resolving one class.
struct ResolveContext {
  const TypeTable& types;
  const std::map<std::string, ClassRef>& classes;  // already resolved
};

// Type of an input attribute declared as `name`: a declared type or the
// output type of a resolved class. Returns nullptr and appends a diagnostic
// when the name is unknown or denotes an infinite builtin type.
TypeRef resolve_input_type(const std::string& name, const ResolveContext& ctx, const dsl::SourcePos& pos,
                           std::vector<Diagnostic>& diags);

// Inputs of `cls` that are DAG ancestors of at least one of `outs`.
std::set<std::string> required_inputs(const ClassDef& cls, const std::vector<std::string>& outs);

// Interface restricted to `outs` and the inputs they require.
// Throws E_UNKNOWN_OUTPUT if some label is not an output of `cls`.
InterfaceType projected_interface(const ClassDef& cls, const std::vector<std::string>& outs);

// Empty when `sub` is a subclass of `super` (outputs superset, projected
// interface onto super's outputs a subtype of super's interface).
std::vector<Diagnostic> check_subclass(const ClassDef& sub, const ClassDef& super, const CoarseningSet& maps);

// Applies a class declaration on top of its (resolved) parent. Inherited
// attributes keep type, OONF and annotations unless redeclared; a
// redeclaration without a binding list keeps the parent's annotations.
// The result is validated and, when a parent exists, checked as a subclass.
// Throws oobn::Error with all diagnostics on failure.
ClassRef resolve_inheritance(const dsl::ClassDecl& decl, const ClassDef* parent, const ResolveContext& ctx);

}  // namespace oobn
