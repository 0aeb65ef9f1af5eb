#pragma once

#include <array>
#include <map>
#include <vector>

#include "oobn/factor.hpp"
#include "oobn/flatten.hpp"

namespace oobn {

struct Triangulation {
  std::vector<int> order;                  // elimination order (variable ids)
  std::vector<std::vector<int>> cliques;   // maximal cliques, creation order
};

// Min-fill elimination over the moral graph of `families` plus `required`
// sets (each made complete first). Ties: smaller clique weight (product of
// domain sizes), then smaller rank. `vars`, `sizes` and `rank` are
// parallel; clique members are listed by increasing rank.
Triangulation triangulate(const std::vector<int>& vars, const std::vector<int>& sizes, const std::vector<int>& rank,
                          const std::vector<std::vector<int>>& families,
                          const std::vector<std::vector<int>>& required);

// Whole-network form; ranks follow the lexicographic order of variable ids.
Triangulation triangulate(const FlatBN& bn, const std::vector<std::vector<int>>& required = {});

struct CliqueTree {
  std::vector<std::vector<int>> cliques;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<int>> separators;  // per edge, in clique order
  std::vector<std::vector<int>> incident;    // clique -> edge indices
  std::vector<int> assignment;               // family index -> clique

  // First clique containing every variable of `vars`, or -1.
  int covering(const std::vector<int>& vars) const;
};

// Maximum spanning tree over separator sizes (ties by clique index), with
// the running intersection property verified. Each family goes to the
// first clique that covers it; throws E_COVERAGE when none does.
CliqueTree build_jt(const std::vector<std::vector<int>>& cliques, const std::vector<std::vector<int>>& families);

// Division-free message passing on one clique tree. Clique potentials are
// base tables times evidence indicators times attached external factors;
// an optional "down" factor enters at the root clique only.
class ShaferShenoyTree {
 public:
  ShaferShenoyTree() = default;
  ShaferShenoyTree(CliqueTree tree, std::vector<Factor> base, int root);

  const CliqueTree& tree() const { return tree_; }
  int root() const { return root_; }
  int size_of(int var) const;

  // Return true when the potentials actually changed.
  bool set_evidence(int var, int value);
  bool retract_evidence(int var);
  const std::map<int, int>& evidence() const { return evidence_; }

  // External factor keyed by `key`, multiplied into clique `clique`.
  void attach(int key, int clique, Factor f);
  void detach(int key);
  const Factor* attached(int key) const;

  void set_down(Factor f);
  void clear_down();
  bool has_down() const { return has_down_; }

  bool collected() const { return collect_valid_; }
  bool distributed() const { return distribute_valid_; }

  void collect(CostCounter* cost);
  void distribute(CostCounter* cost);

  // Messages toward the root, one per non-root clique in tree order.
  std::vector<Factor> collect_messages() const;
  void install_collect_messages(std::vector<Factor> msgs);

  // Marginal over `scope` (a subset of the root clique) of everything in
  // this tree except the down factor. Requires collect.
  Factor up_message(const std::vector<int>& scope, CostCounter* cost) const;
  // Marginal over `scope` of everything except the factor attached under
  // `key`. Requires collect and distribute.
  Factor message_excluding(int key, const std::vector<int>& scope, CostCounter* cost) const;

  Factor belief(int clique, CostCounter* cost) const;
  // Normalized posterior over arbitrary `vars` (request order). Requires
  // calibration. Throws E_ZERO_PROB.
  Factor marginal(const std::vector<int>& vars, CostCounter* cost) const;
  // Unnormalized factors whose product is this tree's joint (with evidence,
  // attachments and down factor), for cross-tree elimination.
  void joint_factors(std::vector<Factor>& out, const std::vector<int>& skip_attached_keys = {},
                     bool include_down = true) const;

  // Renames variables and attachment keys in place. Both maps must be
  // injective; tables are untouched.
  void remap(const std::map<int, int>& vars, const std::map<int, int>& keys);

  double max_separator_discrepancy() const;

 private:
  const Factor& potential(int c) const;
  Factor gather(int c, int skip_edge, int skip_key, bool with_down, CostCounter* cost) const;
  void orient();
  int evidence_clique(int var) const;

  CliqueTree tree_;
  std::vector<Factor> base_;
  std::map<int, int> sizes_;
  int root_ = 0;
  std::vector<int> order_;        // BFS order from the root
  std::vector<int> parent_edge_;  // per clique, -1 at the root
  std::vector<int> parent_;
  std::map<int, int> evidence_;
  std::map<int, std::pair<int, Factor>> attached_;
  Factor down_;
  bool has_down_ = false;
  // messages_[e][0]: first -> second; [1]: second -> first.
  std::vector<std::array<Factor, 2>> messages_;
  bool collect_valid_ = false;
  bool distribute_valid_ = false;
  mutable std::vector<Factor> potential_cache_;
  mutable std::vector<bool> potential_valid_;
};

// Flat junction-tree engine over a whole FlatBN.
class JunctionTree {
 public:
  explicit JunctionTree(const FlatBN& bn, const std::vector<std::vector<int>>& required = {});

  const CliqueTree& structure() const { return engine_.tree(); }
  const Triangulation& triangulation() const { return tri_; }

  void set_evidence(int var, int value);  // E_BAD_VALUE
  void retract_evidence(int var);
  void clear_evidence();
  const std::map<int, int>& evidence() const { return engine_.evidence(); }

  void calibrate(CostCounter* cost = nullptr);  // E_ZERO_PROB
  bool calibrated() const { return engine_.collected() && engine_.distributed(); }

  Factor marginal(const std::vector<int>& vars, CostCounter* cost = nullptr) const;  // E_NOT_CALIBRATED
  Factor clique_belief(int clique) const;
  double evidence_probability() const;
  double max_separator_discrepancy() const { return engine_.max_separator_discrepancy(); }

 private:
  const FlatBN* bn_;
  Triangulation tri_;
  ShaferShenoyTree engine_;
};

}  // namespace oobn
