#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "oobn/dsl.hpp"
#include "oobn/types.hpp"

// Golden models and generators for tests and benchmarks.
namespace oobn::corpus {

struct Entry {
  std::string name;         // file stem, e.g. "accident"
  std::string description;  // first comment line of the file
  std::string text;         // DSL source
  std::string expectations;  // JSON sidecar, empty when absent
};

const std::vector<Entry>& entries();
// Throws std::out_of_range for an unknown name.
const Entry& entry(std::string_view name);

dsl::ModelSource accident_model();
const std::string& accident_text();

// Accident models that use SPORTS-CAR, FUEL-INJECTED-ENGINE, RICH-DRIVER
// (RICH-PERSON income refinement) and COMMUTE-ROAD.
std::vector<dsl::ModelSource> subclass_suite();
std::vector<std::string> subclass_suite_names();

// k identical cars sharing one driver; each car feeds its own risk
// variable in the situation. CPTs of the risk variables depend on `seed`.
std::string generate_family_text(int k, std::uint64_t seed);
dsl::ModelSource generate_family(int k, std::uint64_t seed);

struct RandomModelOptions {
  int max_vars = 14;   // simple variables after unrolling
  int max_depth = 3;   // nesting levels below the situation
  int max_parents = 3;
  int max_inputs = 2;
};

// Random Boolean OOBN: nested classes with inputs, outputs, private
// attributes and reused class definitions.
std::string random_model_text(std::uint64_t seed, const RandomModelOptions& opts = {});

// Random class named `name` (no complex attributes, simple outputs) plus
// a situation that instantiates it. Inputs are Boolean or small enums.
std::string random_class_text(std::uint64_t seed, const std::string& name = "K");

// Random basic types with coarsening maps closed under composition.
struct TypeLattice {
  std::vector<TypeRef> types;
  CoarseningSet maps;
};
TypeLattice random_type_lattice(std::uint64_t seed);

// Random structured types over a lattice's basic types (width and depth
// subtyping both arise).
std::vector<TypeRef> random_structured_types(const TypeLattice& lattice, std::uint64_t seed, int count);

}  // namespace oobn::corpus
