#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "oobn/factor.hpp"
#include "oobn/flatten.hpp"
#include "oobn/inference.hpp"
#include "oobn/model.hpp"

namespace oobn {

// Variables a complex object imports (defined outside, feeding a variable
// inside) and exports (defined inside, feeding a variable outside).
// Both lists are sorted by variable index.
struct IOSet {
  int owner = -1;
  std::vector<int> imported;
  std::vector<int> exported;

  std::vector<int> all() const;  // sorted union
};

// One entry per complex object (the root included), keyed by object id.
std::map<int, IOSet> compute_io_sets(const GroundModel& gm, const FlatBN& bn);

// True when `separator` d-separates `inside` from every other variable.
bool verify_dsep(const FlatBN& bn, const std::vector<int>& inside, const std::vector<int>& separator);

// Collect results and junction-tree skeletons keyed by a canonical
// description of a class instance's subtree. Shared across sessions;
// entries are immutable once published.
class ClassCache {
 public:
  // Factors are over canonical variable indices of the subtree.
  struct Collect {
    struct Part {
      std::vector<Factor> messages;  // collect messages, tree order
      Factor up;
    };
    std::vector<Part> parts;  // subnets of the subtree, preorder
  };
  struct Skeleton {
    CliqueTree tree;
    std::vector<Factor> base;
    int root = 0;
  };

  std::shared_ptr<const Collect> find_collect(const std::string& key) const;
  void publish_collect(const std::string& key, std::shared_ptr<const Collect> entry);
  std::shared_ptr<const Skeleton> find_skeleton(const std::string& key) const;
  void publish_skeleton(const std::string& key, std::shared_ptr<const Skeleton> entry);

  std::size_t size() const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<const Collect>> collects_;
  std::unordered_map<std::string, std::shared_ptr<const Skeleton>> skeletons_;
};

struct SubnetCost {
  std::uint64_t collect = 0;
  std::uint64_t distribute = 0;
  std::uint64_t total() const { return collect + distribute; }
};

struct CostReport {
  struct Entry {
    std::string path;
    SubnetCost cost;
  };
  std::vector<Entry> subnets;  // preorder
  std::uint64_t total = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  std::vector<std::string> recalibrated;  // by the last operation
};

// What a rebuild kept and what it redid, by subnet path.
struct RebuildStats {
  std::vector<std::string> rebuilt;
  std::vector<std::string> reused;
  std::vector<std::string> removed;
};

// Linked junction trees, one per complex object, joined along the object
// tree. Calibration is lazy: collect runs leaf to root on demand and
// distribute only along the paths that queries reach.
class Hypertree {
 public:
  struct Subnet {
    int object = -1;
    std::string path;
    int parent = -1;             // subnet index
    std::vector<int> children;   // subnet indices
    std::vector<int> local;      // variables whose object sits directly in this one
    std::vector<int> sigma;      // sorted by variable index
    IOSet io;
    std::vector<int> io_order;   // io.all() in canonical rank order
    std::vector<int> child_iface;  // per child: clique covering its d-sepset
    ShaferShenoyTree tree;
    SubnetCost cost;

    // Internal bookkeeping.
    std::vector<std::string> names;  // canonical name per sigma entry
    std::string descriptor;          // canonical subtree description
    std::string signature;           // local structure by variable id
    Factor up;
    std::uint64_t up_version = 0;
    std::vector<std::uint64_t> attached_version;  // per child
    std::uint64_t epoch = 0;         // bumped on every distribute
    std::uint64_t down_epoch = 0;    // parent epoch the down factor came from
    std::optional<std::pair<Factor, std::uint64_t>> prior_up;
  };

  // `cache` may be null (caching disabled). `previous`, when given, lends
  // subnets whose local structure is unchanged; their state carries over.
  Hypertree(std::shared_ptr<const GroundModel> gm, std::shared_ptr<const FlatBN> bn,
            std::shared_ptr<ClassCache> cache = nullptr, Hypertree* previous = nullptr);

  const GroundModel& ground() const { return *gm_; }
  const FlatBN& bn() const { return *bn_; }
  const std::vector<Subnet>& subnets() const { return subnets_; }
  const RebuildStats& rebuild_stats() const { return rebuild_; }
  int root() const { return 0; }

  int subnet_of_object(int object) const;  // -1 for simple objects
  int owner(int var) const { return owner_[var]; }  // subnet holding the family
  std::vector<int> dsepset(int subnet) const;       // sigma(parent) ∩ sigma(subnet)
  bool caching() const { return cache_ != nullptr; }

  void set_evidence(int var, int value);  // E_BAD_VALUE
  void retract_evidence(int var);
  std::map<int, int> evidence() const;

  // Global collect; throws E_ZERO_PROB.
  void collect();
  void calibrate_all();
  double evidence_probability();

  // Normalized posterior over `vars` (request order).
  Factor marginal(const std::vector<int>& vars, CostCounter* cost = nullptr);

  // Largest disagreement between any two subnets on the marginal of a
  // shared variable, and between linked subnets on their d-sepset joint.
  double max_shared_discrepancy();

  // Starts a new operation for the recalibration log.
  void begin_operation();
  std::vector<std::string> recalibrated() const;
  // Subnets whose outward message changed during the current operation.
  std::vector<std::string> messages_updated() const;

  CostReport cost_report() const;
  void reset_costs();

 private:
  void build_structure();
  void build_names();
  void build_tree(int s);
  std::vector<int> subtree(int s) const;
  std::vector<int> canonical_vars(int s) const;
  std::string local_signature(int s) const;
  bool stale(int s) const;
  bool subtree_has_evidence(int s) const;
  void ensure_up(int s);
  void compute_up(int s);
  void install(int s, const ClassCache::Collect& entry);
  void store(int s);
  void ensure_calibrated(int s);
  void touch(int s);

  std::shared_ptr<const GroundModel> gm_;
  std::shared_ptr<const FlatBN> bn_;
  std::shared_ptr<ClassCache> cache_;
  std::vector<Subnet> subnets_;
  std::vector<int> subnet_of_object_;
  std::vector<int> owner_;
  std::map<int, int> evidence_;
  // (subnet, variable) -> name of the variable seen from inside the subnet.
  std::map<std::pair<int, int>, std::string> boundary_names_;
  std::uint64_t version_ = 0;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
  std::vector<int> touched_;
  std::vector<int> updated_;
  RebuildStats rebuild_;
};

}  // namespace oobn
