#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oobn/factor.hpp"
#include "oobn/flatten.hpp"
#include "oobn/inference.hpp"
#include "oobn/model.hpp"
#include "oobn/msbn.hpp"

namespace oobn {

inline constexpr std::uint64_t kDefaultIconizeCap = std::uint64_t{1} << 22;

// Interface-equivalent class without encapsulated attributes. Outputs are
// chained in topological order (declaration-order ties); output i gets the
// CPT P(O_i | inputs it depends on, O_1..O_{i-1}) computed exactly from the
// original class. Throws E_ICONIZE for complex outputs, E_TOO_LARGE when a
// chain CPT would exceed `cap` cells.
ClassRef iconize(const ClassRef& cls, std::shared_ptr<const CoarseningSet> maps,
                 std::uint64_t cap = kDefaultIconizeCap);

// Name given to the iconized version of a class.
std::string iconized_name(const std::string& cls);

enum class Engine { kFlat, kMsbn };
std::string to_string(Engine e);
Engine parse_engine(const std::string& s);  // E_BAD_QUERY on anything else

struct RefinementOp {
  enum class Kind { kIconize, kDeiconize, kSubstitute };
  Kind kind = Kind::kIconize;
  std::string path;  // object path, with or without the "Situation." prefix
  std::string cls;   // SUBSTITUTE only
};
std::string to_string(RefinementOp::Kind k);
RefinementOp::Kind parse_refinement_kind(const std::string& s);  // E_BAD_QUERY

struct LocalityStats {
  std::string kind;
  std::string path;  // full object path of the target
  std::vector<std::string> rebuilt;
  std::vector<std::string> reused;
  std::vector<std::string> removed;
  std::vector<std::string> rebuilt_inside;  // rebuilt subnets strictly inside the target
  std::vector<std::string> recalibrated;
  std::vector<std::string> messages_updated;  // subnets whose outward message changed
};

struct EvidenceItem {
  std::string path;
  std::string value;
};

struct QueryResult {
  std::vector<std::string> targets;    // as requested
  std::vector<std::string> variables;  // resolved variable ids
  std::vector<std::vector<std::string>> domains;
  Factor table;  // scope in request order
};

// Per-class entry of the is-a hierarchy as seen by one session (declared
// classes plus iconized classes created during the session).
struct HierarchyEntry {
  std::string name;
  std::string parent;  // empty for roots
  std::string iconized_from;
};

struct SessionOptions {
  Engine engine = Engine::kMsbn;
  std::shared_ptr<ClassCache> cache;  // msbn only; null disables caching
  std::uint64_t iconize_cap = kDefaultIconizeCap;
};

// A live model with persistent evidence and a refinement history.
// Single-owner mutable; the compiled model and cache may be shared.
class Session {
 public:
  explicit Session(ModelRef model, SessionOptions options = {});

  const CompiledModel& model() const { return *model_; }
  ModelRef model_ref() const { return model_; }
  Engine engine() const { return options_.engine; }
  const GroundModel& ground() const { return *gm_; }
  const FlatBN& bn() const { return *bn_; }
  const Hypertree* hypertree() const { return ht_.get(); }

  // Posterior over `targets` given session evidence plus `evidence`, which
  // applies to this call only. Throws E_BAD_CHAIN, E_BAD_VALUE, E_ZERO_PROB.
  QueryResult query(const std::vector<std::string>& targets, const std::vector<EvidenceItem>& evidence = {});

  // E_BAD_CHAIN, E_BAD_VALUE, E_ZERO_PROB (the session is left unchanged).
  void assert_evidence(const std::string& path, const std::string& value);
  void retract_evidence(const std::string& path);
  std::vector<EvidenceItem> evidence() const;  // by variable id, sorted

  // E_UNKNOWN_PATH, E_INCOMPATIBLE_CLASS, E_EVIDENCE_ORPHANED, E_ICONIZE,
  // E_TOO_LARGE, E_ZERO_PROB. On error the session is unchanged.
  LocalityStats apply(const RefinementOp& op);
  const std::vector<RefinementOp>& history() const { return history_; }

  // Classes that SUBSTITUTE would accept at `path`.
  std::vector<std::string> compatible_classes(const std::string& path) const;
  std::vector<HierarchyEntry> hierarchy() const;
  bool is_iconized(const std::string& path) const;

  CostReport cost_report() const;
  void reset_costs();

  // JSON-lines record of every successful operation since construction.
  const std::vector<std::string>& log() const { return log_; }

 private:
  struct Override {
    std::string cls;
    bool iconized = false;
  };

  int resolve_variable(const std::string& path) const;
  int value_index(int var, const std::string& value) const;
  std::string relative(const std::string& path) const;
  ClassRef effective(const Override& o) const;
  ClassRef icon_of(const ClassRef& cls) const;
  void check_substitution(int object, const ClassRef& replacement) const;
  void rebuild_flat();
  void calibrate_flat();
  void begin_operation();
  Factor posterior(const std::vector<int>& vars);
  void log_op(const std::string& line);

  ModelRef model_;
  SessionOptions options_;
  std::shared_ptr<const GroundModel> gm_;
  std::shared_ptr<const FlatBN> bn_;
  std::unique_ptr<Hypertree> ht_;
  std::unique_ptr<JunctionTree> jt_;
  SubnetCost flat_cost_;
  std::map<std::string, Override> overrides_;  // relative path -> override
  std::map<std::string, int> evidence_;        // variable id -> value index
  std::vector<RefinementOp> history_;
  std::vector<std::string> log_;
  std::vector<std::string> recalibrated_;
  mutable std::map<std::string, ClassRef> icons_;
};

// Replays a session log against `model`. Queries in the log are re-run and
// their results returned in order. Throws E_BAD_LOG on malformed lines.
struct ReplayResult {
  std::unique_ptr<Session> session;
  std::vector<QueryResult> queries;
};
ReplayResult replay(ModelRef model, const std::vector<std::string>& lines, std::shared_ptr<ClassCache> cache = nullptr);

}  // namespace oobn
