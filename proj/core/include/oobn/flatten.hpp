#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "oobn/factor.hpp"
#include "oobn/model.hpp"

namespace oobn {

struct FlatVariable {
  std::string id;   // full path, e.g. "Situation.Car.Engine.Power"
  int object = -1;  // ground object; -1 for a free root input
  TypeRef type;
  std::vector<int> parents;  // distinct source variables
  std::vector<double> cpt;   // row-major over parents, own value last
  bool free_input = false;   // uniform prior standing in for an unbound root input

  int size() const { return type->size(); }
};

// BN(B): one variable per simple object, in sigma order (topological).
struct FlatBN {
  std::vector<FlatVariable> vars;
  std::vector<int> object_var;  // ground object id -> variable, -1 for complex objects

  // Accepts ids with or without the root label prefix; -1 when absent.
  int find(std::string_view id) const;
  std::vector<int> sizes() const;
  std::vector<std::vector<int>> children() const;
  // The CPT of v as a factor over (parents..., v).
  Factor cpt_factor(int v) const;
};

// Where a chain lands: a simple object, or (when the root's inputs are free)
// the remaining chain below a root input.
struct ChainTarget {
  int object = -1;
  std::vector<std::string> root_input_chain;
};

// Follows `chain` from `origin`, crossing input attributes through the
// annotations of their containers. Throws E_BAD_CHAIN, E_UNBOUND_INPUT.
int resolve_chain(const GroundModel& gm, int origin, const std::vector<std::string>& chain);
ChainTarget resolve_chain_target(const GroundModel& gm, int origin, const std::vector<std::string>& chain);

FlatBN build_flat_bn(const GroundModel& gm);

using Assignment = std::vector<std::pair<int, int>>;  // variable, value index

// Exact posterior over `targets` (request order) by full enumeration.
// Throws E_TOO_LARGE above `cap` joint states, E_ZERO_PROB on impossible
// evidence, E_BAD_VALUE on out-of-range evidence.
Factor enumerate_joint(const FlatBN& bn, const Assignment& evidence, const std::vector<int>& targets,
                       std::uint64_t cap = std::uint64_t{1} << 22);

}  // namespace oobn
