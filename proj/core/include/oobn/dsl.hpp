#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oobn/error.hpp"

// Textual model language (.oobn). The grammar is documented in
// docs/grammar.md. The AST mirrors declarations one-to-one; semantic
// checks live in typesys and model.
namespace oobn::dsl {

struct SourcePos {
  int line = 0;
  int column = 0;
  // Positions never participate in structural equality.
  bool operator==(const SourcePos&) const { return true; }
};

struct TypeDecl {
  enum class Kind { kEnum, kStruct };

  std::string name;
  Kind kind = Kind::kEnum;
  std::vector<std::string> values;                          // kEnum
  std::vector<std::pair<std::string, std::string>> fields;  // kStruct: label, type name
  SourcePos pos;

  bool operator==(const TypeDecl&) const = default;
};

// Declared coarsening map between two basic types.
struct MapDecl {
  std::string from;
  std::string to;
  std::vector<std::pair<std::string, std::string>> pairs;
  SourcePos pos;

  bool operator==(const MapDecl&) const = default;
};

// `Slot [: TYPE] <- B.rho`
struct Binding {
  std::string slot;
  std::string type;  // empty when inferred from the source chain
  std::vector<std::string> chain;
  SourcePos pos;

  bool operator==(const Binding&) const = default;
};

struct CptRow {
  bool is_default = false;
  std::vector<std::string> key;  // one value per binding, in binding order
  std::vector<double> probs;
  SourcePos pos;

  bool operator==(const CptRow&) const = default;
};

enum class AttrKind { kInput, kOutput, kPrivate };

struct AttrDecl {
  AttrKind kind = AttrKind::kPrivate;
  std::string label;
  std::string type;  // basic type name, structured type name, or class name
  bool has_bindings = false;
  std::vector<Binding> bindings;
  std::vector<std::string> parents;  // explicit DAG parents beyond the bindings
  bool has_cpt = false;
  std::vector<CptRow> rows;
  SourcePos pos;

  bool operator==(const AttrDecl&) const = default;
};

struct ClassDecl {
  std::string name;
  std::string parent;  // empty when the class has no parent
  std::vector<AttrDecl> members;
  SourcePos pos;

  bool operator==(const ClassDecl&) const = default;
};

struct ModelSource {
  std::vector<TypeDecl> types;
  std::vector<MapDecl> maps;
  std::vector<ClassDecl> classes;
  std::optional<ClassDecl> situation;

  bool operator==(const ModelSource&) const = default;
};

struct ParseResult {
  std::optional<ModelSource> model;
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return model.has_value(); }
};

// Never throws on malformed input; every failure becomes a diagnostic.
ParseResult parse_model(std::string_view text);

// Throws oobn::Error carrying the diagnostics on failure.
ModelSource parse_model_or_throw(std::string_view text);

std::string render_model(const ModelSource& model);

// Bare if the text lexes back as one name token, quoted otherwise.
std::string render_name(std::string_view name);

// Shortest decimal text that parses back to the same double.
std::string format_probability(double p);

const char* attr_kind_name(AttrKind kind);

}  // namespace oobn::dsl
