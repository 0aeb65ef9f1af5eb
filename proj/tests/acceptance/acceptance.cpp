// Acceptance gate: one line per criterion, non-zero exit when any fails.
//
//   oobn_acceptance [--only NAME]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oobn/corpus.hpp"
#include "oobn/dsl.hpp"
#include "oobn/msbn.hpp"
#include "oobn/session.hpp"
#include "oobn/typesys.hpp"
#include "support.hpp"

using namespace oobn;
using nlohmann::json;
using oobn::test::max_abs_diff;

namespace {

// Tolerances and sizes, fixed here so no criterion drifts.
constexpr double kOracleTol = 1e-6;
constexpr int kOracleModels = 500;
constexpr double kOracleSeconds = 120.0;
constexpr double kCrossTol = 1e-6;
constexpr int kCrossEvidenceSets = 100;
constexpr double kUniqueTol = 1e-12;
constexpr int kUniqueReorders = 10;
constexpr std::size_t kUniqueMaxVars = 16;
constexpr double kScalingResidual = 0.05;
constexpr double kIconTol = 1e-9;
constexpr int kIconClasses = 50;
constexpr double kRefineTol = 1e-6;
constexpr int kRefineSequences = 40;
constexpr int kLattices = 1000;
constexpr int kFuzzInputs = 100000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Built {
  ModelRef model;
  std::shared_ptr<const GroundModel> gm;
  std::shared_ptr<const FlatBN> bn;
};

Built build(const ModelRef& m, const ClassOverrides& ov = {}) {
  Built b;
  b.model = m;
  b.gm = std::make_shared<const GroundModel>(instantiate(*m, ov));
  b.bn = std::make_shared<const FlatBN>(build_flat_bn(*b.gm));
  return b;
}

Built build(const std::string& text) { return build(compile_text(text)); }

bool possible(const FlatBN& bn, const Assignment& ev) {
  JunctionTree jt(bn);
  for (auto [v, x] : ev) jt.set_evidence(v, x);
  try {
    jt.calibrate();
  } catch (const Error& e) {
    if (e.code() == codes::kZeroProb) return false;
    throw;
  }
  return true;
}

// 1-4 observed variables with uniformly drawn values, redrawn until the
// evidence has positive probability.
Assignment random_evidence(const FlatBN& bn, std::mt19937_64& rng) {
  while (true) {
    Assignment ev;
    int n = 1 + static_cast<int>(rng() % 4);
    std::set<int> used;
    for (int i = 0; i < n; ++i) {
      int v = static_cast<int>(rng() % bn.vars.size());
      if (!used.insert(v).second) continue;
      ev.emplace_back(v, static_cast<int>(rng() % bn.vars[v].size()));
    }
    if (possible(bn, ev)) return ev;
  }
}

std::vector<std::string> corpus_like_texts() {
  std::vector<std::string> texts;
  for (const auto& e : corpus::entries()) texts.push_back(e.text);
  for (int k : {1, 2, 4, 8}) texts.push_back(corpus::generate_family_text(k, 7));
  return texts;
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int checked = 0;
  std::size_t max_vars = 0;
  for (int i = 0; i < kOracleModels; ++i) {
    std::uint64_t seed = 100000 + static_cast<std::uint64_t>(i);
    Built b = build(corpus::random_model_text(seed));
    max_vars = std::max(max_vars, b.bn->vars.size());
    std::mt19937_64 rng(seed);
    Assignment ev;
    do {
      ev.clear();
      for (std::size_t v = 0; v < b.bn->vars.size(); ++v) {
        if (rng() % 4 == 0) ev.emplace_back(static_cast<int>(v), static_cast<int>(rng() % 2));
      }
    } while (!possible(*b.bn, ev));
    JunctionTree jt(*b.bn);
    Hypertree ht(b.gm, b.bn, std::make_shared<ClassCache>());
    for (auto [v, x] : ev) {
      jt.set_evidence(v, x);
      ht.set_evidence(v, x);
    }
    jt.calibrate();
    for (std::size_t v = 0; v < b.bn->vars.size(); ++v) {
      Factor want = enumerate_joint(*b.bn, ev, {int(v)});
      worst = std::max(worst, max_abs_diff(want, jt.marginal({int(v)})));
      worst = std::max(worst, max_abs_diff(want, ht.marginal({int(v)})));
      ++checked;
    }
  }
  double secs = seconds_since(t0);
  bool sizes_ok = max_vars <= 14;
  return {worst <= kOracleTol && secs < kOracleSeconds && sizes_ok,
          std::to_string(kOracleModels) + " models (<= " + std::to_string(max_vars) + " vars), " +
              std::to_string(checked) + " posteriors x 2 engines, max err " + fmt(worst) + " (tol " + fmt(kOracleTol) +
              "), " + fmt(secs) + " s (limit " + fmt(kOracleSeconds) + " s)"};
}

Outcome engine_cross_check() {
  double worst = 0.0;
  int models = 0, sets = 0;
  std::string failure;
  for (const auto& text : corpus_like_texts()) {
    Built b = build(text);
    JunctionTree jt(*b.bn);
    Hypertree ht(b.gm, b.bn, std::make_shared<ClassCache>());
    std::mt19937_64 rng(4242 + models);
    for (int i = 0; i < kCrossEvidenceSets; ++i) {
      Assignment ev = random_evidence(*b.bn, rng);
      jt.clear_evidence();
      for (auto [v, _] : ht.evidence()) ht.retract_evidence(v);
      for (auto [v, x] : ev) {
        jt.set_evidence(v, x);
        ht.set_evidence(v, x);
      }
      jt.calibrate();
      for (std::size_t v = 0; v < b.bn->vars.size(); ++v) {
        worst = std::max(worst, max_abs_diff(jt.marginal({int(v)}), ht.marginal({int(v)})));
      }
      ++sets;
    }
    ++models;
  }
  return {worst <= kCrossTol, std::to_string(models) + " models, " + std::to_string(sets) +
                                  " evidence sets, all single-variable posteriors, max diff " + fmt(worst) + " (tol " +
                                  fmt(kCrossTol) + ")"};
}

const char* kMutationModel = R"(
class K {
  input I : Boolean;
  private H : Boolean (I <- I) { (true) : 0.9, 0.1; (false) : 0.2, 0.8; }
  output O : Boolean (H <- H) { (true) : 0.7, 0.3; (false) : 0.4, 0.6; }
}
situation {
  private S : Boolean { () : 0.3, 0.7; }
  private X : K (I <- S);
  private Y : Boolean (O <- X.O) { (true) : 0.6, 0.4; (false) : 0.1, 0.9; }
}
)";

std::vector<int> interior(const GroundModel& gm, const FlatBN& bn, int object) {
  std::vector<int> out;
  for (int d : gm.descendants(object)) {
    if (bn.object_var[d] >= 0) out.push_back(bn.object_var[d]);
  }
  return out;
}

Outcome io_sets_separate() {
  int objects = 0, failures = 0;
  for (const auto& text : corpus_like_texts()) {
    Built b = build(text);
    for (const auto& [object, io] : compute_io_sets(*b.gm, *b.bn)) {
      if (object == 0) continue;
      ++objects;
      if (!verify_dsep(*b.bn, interior(*b.gm, *b.bn, object), io.all())) ++failures;
    }
  }
  // Counterexample: X imports S and exports X.O. Dropping S from the
  // separator lets the interior reach S.
  Built m = build(kMutationModel);
  int x = m.gm->find("Situation.X");
  IOSet io = compute_io_sets(*m.gm, *m.bn).at(x);
  std::vector<int> inside = interior(*m.gm, *m.bn, x);
  bool intact = verify_dsep(*m.bn, inside, io.all());
  std::vector<int> dropped = io.exported;
  bool mutated = verify_dsep(*m.bn, inside, dropped);
  bool shape = io.imported.size() == 1 && io.exported.size() == 1;
  return {failures == 0 && objects > 0 && intact && !mutated && shape,
          std::to_string(objects) + " complex objects, " + std::to_string(failures) +
              " I/O sets fail to separate; mutation model: full set " + (intact ? "true" : "false") +
              ", one dropped " + (mutated ? "true" : "false")};
}

// Shuffles type, class and member declarations.
dsl::ModelSource reorder(dsl::ModelSource src, std::mt19937_64& rng) {
  std::shuffle(src.types.begin(), src.types.end(), rng);
  std::shuffle(src.maps.begin(), src.maps.end(), rng);
  std::shuffle(src.classes.begin(), src.classes.end(), rng);
  for (auto& c : src.classes) std::shuffle(c.members.begin(), c.members.end(), rng);
  std::shuffle(src.situation->members.begin(), src.situation->members.end(), rng);
  return src;
}

// Exact joint over `ids` by variable elimination on the CPT factors.
Factor projected_joint(const FlatBN& bn, const std::vector<std::string>& ids) {
  std::vector<Factor> fs;
  for (std::size_t v = 0; v < bn.vars.size(); ++v) fs.push_back(bn.cpt_factor(static_cast<int>(v)));
  std::vector<int> keep, sizes;
  for (const auto& id : ids) {
    keep.push_back(bn.find(id));
    sizes.push_back(bn.vars[keep.back()].size());
  }
  Factor f = eliminate(fs, keep, sizes);
  f.normalize();
  return f;
}

Outcome declaration_order_invariance() {
  const std::vector<std::string> projection = {
      "Damage",           "Injury",           "Accident",          "Speed",
      "Driver.Age",       "Driver.Gender",    "Car.Type",          "Car.Age",
      "Car.Engine.Power", "Car.Tires.Traction", "Car.Brakes.Condition", "Weather.Precipitation",
      "Road.Location",    "Road.Condition",   "Driver.Alertness",  "Car.Maintenance"};
  dsl::ModelSource base = corpus::accident_model();
  FlatBN ref = build_flat_bn(instantiate(*compile(base)));
  Factor want = projected_joint(ref, projection);
  std::mt19937_64 rng(2015);
  double worst = 0.0;
  int orders_differ = 0;
  for (int i = 0; i < kUniqueReorders; ++i) {
    dsl::ModelSource shuffled = reorder(base, rng);
    FlatBN bn = build_flat_bn(instantiate(*compile(shuffled)));
    bool same_order = true;
    for (std::size_t v = 0; v < bn.vars.size(); ++v) same_order = same_order && bn.vars[v].id == ref.vars[v].id;
    orders_differ += !same_order;
    worst = std::max(worst, max_abs_diff(want, projected_joint(bn, projection)));
  }
  return {worst <= kUniqueTol && projection.size() <= kUniqueMaxVars,
          std::to_string(kUniqueReorders) + " reorderings (" + std::to_string(orders_differ) +
              " with a different variable order), " + std::to_string(projection.size()) + "-variable joint (" +
              std::to_string(want.cells()) + " cells), max diff " + fmt(worst) + " (tol " + fmt(kUniqueTol) + ")"};
}

Outcome scaling() {
  const std::vector<int> ks = {1, 2, 4, 8};
  std::vector<double> cost;
  bool cached_ok = true;
  std::ostringstream hits;
  for (int k : ks) {
    Built b = build(corpus::generate_family_text(k, 7));
    Hypertree off(b.gm, b.bn);
    off.calibrate_all();
    cost.push_back(static_cast<double>(off.cost_report().total));

    Hypertree on(b.gm, b.bn, std::make_shared<ClassCache>());
    on.collect();
    CostReport r = on.cost_report();
    std::set<std::string> paid;
    const std::string prefix = "Situation.Car";
    for (const auto& s : r.subnets) {
      if (s.path.rfind(prefix, 0) == 0 && s.cost.collect > 0) paid.insert(s.path.substr(0, s.path.find('.', prefix.size())));
    }
    cached_ok = cached_ok && paid.size() == 1 && r.cache_hits == std::uint64_t(k - 1);
    hits << (hits.tellp() ? "," : "") << r.cache_hits;
  }
  // Least squares a*k + b.
  double n = static_cast<double>(ks.size()), sk = 0, sy = 0, skk = 0, sky = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    sk += ks[i];
    sy += cost[i];
    skk += double(ks[i]) * ks[i];
    sky += ks[i] * cost[i];
  }
  double a = (n * sky - sk * sy) / (n * skk - sk * sk);
  double b = (sy - a * sk) / n;
  double worst = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) worst = std::max(worst, std::abs(cost[i] - (a * ks[i] + b)) / cost[i]);
  std::ostringstream cells;
  for (std::size_t i = 0; i < cost.size(); ++i) cells << (i ? "," : "") << static_cast<std::uint64_t>(cost[i]);
  return {worst < kScalingResidual && cached_ok,
          "uncached cells k=1,2,4,8: " + cells.str() + ", fit " + fmt(a) + "*k+" + fmt(b) + ", max relative residual " +
              fmt(worst) + " (limit " + fmt(kScalingResidual) + "); cached hits " + hits.str() +
              ", car subtree collected once: " + (cached_ok ? "yes" : "no")};
}

Outcome iconization() {
  double worst = 0.0;
  for (int i = 0; i < kIconClasses; ++i) {
    ModelRef m = compile_text(corpus::random_class_text(7000 + static_cast<std::uint64_t>(i), "K"));
    ClassRef k = m->find_class("K");
    worst = std::max(worst, test::conditional_gap(k, iconize(k, m->types.maps), m->types.maps));
  }
  ModelRef acc = compile_text(corpus::accident_text());
  for (const char* name : {"ENGINE", "CAR"}) {
    ClassRef c = acc->find_class(name);
    worst = std::max(worst, test::conditional_gap(c, iconize(c, acc->types.maps), acc->types.maps));
  }

  // Whole-model queries outside the car's interior.
  double query_worst = 0.0;
  Session full(acc, {Engine::kMsbn, std::make_shared<ClassCache>()});
  Session icon(acc, {Engine::kMsbn, std::make_shared<ClassCache>()});
  icon.apply({RefinementOp::Kind::kIconize, "Car", ""});
  std::vector<std::string> outside;
  for (const auto& v : full.bn().vars) {
    std::string id = v.id.substr(std::string("Situation.").size());
    bool inside_car = id.rfind("Car.", 0) == 0 && icon.bn().find(v.id) < 0;
    if (!inside_car) outside.push_back(id);
  }
  std::mt19937_64 rng(31);
  for (int i = 0; i < 20; ++i) {
    std::vector<EvidenceItem> ev;
    if (i > 0) {
      for (int j = 0; j < 2; ++j) {
        const std::string& p = outside[rng() % outside.size()];
        const FlatVariable& fv = full.bn().vars[full.bn().find(p)];
        ev.push_back({p, fv.type->values()[rng() % fv.size()]});
      }
    }
    for (const auto& t : outside) {
      try {
        query_worst = std::max(query_worst, max_abs_diff(full.query({t}, ev).table, icon.query({t}, ev).table));
      } catch (const Error& e) {
        if (e.code() != codes::kZeroProb) throw;
        break;
      }
    }
  }
  return {worst <= kIconTol && query_worst <= kIconTol,
          std::to_string(kIconClasses) + " random classes + ENGINE + CAR, max conditional gap " + fmt(worst) +
              "; " + std::to_string(outside.size()) + " accident variables outside the car, max query diff " +
              fmt(query_worst) + " (tol " + fmt(kIconTol) + ")"};
}

Factor scratch_posterior(const ModelRef& m, const ClassOverrides& ov, const std::string& target) {
  Built b = build(m, ov);
  JunctionTree jt(*b.bn);
  jt.calibrate();
  return jt.marginal({b.bn->object_var[resolve_chain(*b.gm, 0, split_path(target))]});
}

Outcome refinement_locality() {
  ModelRef m = compile_text(corpus::entry("accident_full").text);
  Session s(m, {Engine::kMsbn, std::make_shared<ClassCache>()});
  s.assert_evidence("Driver.Age", "0-20yr");
  s.query({"Damage"});
  s.apply({RefinementOp::Kind::kIconize, "Car", ""});
  LocalityStats sub = s.apply({RefinementOp::Kind::kSubstitute, "Car", "SPORTS-CAR"});
  LocalityStats de = s.apply({RefinementOp::Kind::kDeiconize, "Car", ""});
  bool inside_only = std::all_of(de.rebuilt.begin(), de.rebuilt.end(), [](const std::string& p) {
    return p == "Situation.Car" || p.rfind("Situation.Car.", 0) == 0;
  });

  // Random sequences against a from-scratch build of the final classes.
  const std::vector<std::string> paths = {"Car", "Driver", "Road", "Car.Engine"};
  const std::map<std::string, std::vector<std::string>> choices = {
      {"Car", {"CAR", "SPORTS-CAR"}},
      {"Driver", {"DRIVER", "RICH-DRIVER"}},
      {"Road", {"ROAD", "COMMUTE-ROAD"}},
      {"Car.Engine", {"ENGINE", "FUEL-INJECTED-ENGINE"}}};
  const std::vector<std::string> targets = {"Damage", "Injury", "Accident", "Car.Max-Speed", "Driver.Alertness"};
  std::mt19937_64 rng(55);
  double worst = 0.0;
  int applied = 0, refused = 0;
  std::string unexpected;
  for (int trial = 0; trial < kRefineSequences; ++trial) {
    Session t(m, {Engine::kMsbn, std::make_shared<ClassCache>()});
    std::map<std::string, std::pair<std::string, bool>> state;  // path -> class, iconized
    for (int step = 0; step < 6; ++step) {
      const std::string& p = paths[rng() % paths.size()];
      RefinementOp op;
      op.path = p;
      bool iconized = state.count(p) && state[p].second;
      if (rng() % 2) {
        op.kind = RefinementOp::Kind::kSubstitute;
        const auto& opts = choices.at(p);
        op.cls = opts[rng() % opts.size()];
      } else {
        op.kind = iconized ? RefinementOp::Kind::kDeiconize : RefinementOp::Kind::kIconize;
      }
      try {
        t.apply(op);
        if (trial % 4 == 0) t.query({targets[rng() % targets.size()]});
      } catch (const Error& e) {
        static const std::set<std::string> expected = {codes::kIconize, codes::kIncompatibleClass,
                                                        codes::kUnknownPath};
        if (!expected.count(e.code())) unexpected = e.code();
        ++refused;
        continue;
      }
      ++applied;
      if (!state.count(p)) {
        const GroundObject& o = t.ground().objects[t.ground().find("Situation." + p)];
        state[p] = {o.cls->iconized_from.empty() ? o.cls->name : o.cls->iconized_from, false};
      }
      if (op.kind == RefinementOp::Kind::kSubstitute) state[p].first = op.cls;
      if (op.kind == RefinementOp::Kind::kIconize) state[p].second = true;
      if (op.kind == RefinementOp::Kind::kDeiconize) state[p].second = false;
      if (op.kind != RefinementOp::Kind::kDeiconize) {
        for (auto it = state.begin(); it != state.end();) {
          it = it->first.rfind(p + ".", 0) == 0 ? state.erase(it) : std::next(it);
        }
      }
    }
    ClassOverrides ov;
    for (const auto& [p, st] : state) {
      ClassRef c = m->find_class(st.first);
      ov[p] = st.second ? iconize(c, m->types.maps) : c;
    }
    for (const auto& target : targets) {
      worst = std::max(worst, max_abs_diff(t.query({target}).table, scratch_posterior(m, ov, target)));
    }
  }
  bool pass = sub.rebuilt_inside.empty() && inside_only && worst <= kRefineTol && unexpected.empty();
  return {pass, "substitute on iconized car rebuilt_inside=" + std::to_string(sub.rebuilt_inside.size()) +
                    ", deiconize rebuilt " + std::to_string(de.rebuilt.size()) + " subnets all inside car: " +
                    (inside_only ? "yes" : "no") + "; " + std::to_string(kRefineSequences) + " sequences (" +
                    std::to_string(applied) + " ops applied, " + std::to_string(refused) +
                    " refused with typed errors" + (unexpected.empty() ? "" : ", unexpected " + unexpected) +
                    "), max diff vs scratch " + fmt(worst) + " (tol " + fmt(kRefineTol) + ")"};
}

Outcome type_system() {
  ModelRef m = compile_text(corpus::entry("accident_full").text);
  auto verdict = [&](const char* sub, const char* super) {
    return check_subclass(*m->find_class(sub), *m->find_class(super), m->maps()).empty();
  };
  struct Case {
    const char* sub;
    const char* super;
    bool expected;
  };
  const std::vector<Case> cases = {
      {"COMMUTE-ROAD", "ROAD", true},  {"SPORTS-CAR", "CAR", true},
      {"RICH-PERSON", "PERSON", true}, {"FUEL-INJECTED-ENGINE", "ENGINE", true},
      {"ROAD", "COMMUTE-ROAD", false}, {"CAR", "SPORTS-CAR", false},
      {"PERSON", "RICH-PERSON", false}};
  int verdicts_ok = 0;
  for (const auto& c : cases) verdicts_ok += verdict(c.sub, c.super) == c.expected;
  // The extra input of COMMUTE-ROAD defeats plain interface subtyping.
  bool needs_projection =
      !is_interface_subtype(interface_type(*m->find_class("COMMUTE-ROAD")), interface_type(*m->find_class("ROAD")),
                            m->maps());

  long pairs = 0;
  int violations = 0;
  for (int i = 0; i < kLattices; ++i) {
    corpus::TypeLattice lat = corpus::random_type_lattice(static_cast<std::uint64_t>(i));
    std::vector<TypeRef> all = lat.types;
    for (auto& t : corpus::random_structured_types(lat, static_cast<std::uint64_t>(i), 5)) all.push_back(t);
    std::vector<std::vector<bool>> le(all.size(), std::vector<bool>(all.size()));
    for (std::size_t a = 0; a < all.size(); ++a) {
      for (std::size_t b = 0; b < all.size(); ++b) le[a][b] = is_value_subtype(*all[a], *all[b], lat.maps);
    }
    for (std::size_t a = 0; a < all.size(); ++a) {
      violations += !le[a][a];
      for (std::size_t b = 0; b < all.size(); ++b) {
        if (!le[a][b]) continue;
        for (std::size_t c = 0; c < all.size(); ++c) {
          ++pairs;
          violations += le[b][c] && !le[a][c];
        }
      }
    }
  }
  return {verdicts_ok == static_cast<int>(cases.size()) && needs_projection && violations == 0,
          std::to_string(verdicts_ok) + "/" + std::to_string(cases.size()) +
              " subclass verdicts as expected, projection required for COMMUTE-ROAD: " +
              (needs_projection ? "yes" : "no") + "; " + std::to_string(kLattices) + " lattices, " +
              std::to_string(pairs) + " triples, " + std::to_string(violations) +
              " reflexivity/transitivity violations"};
}

Outcome fig2_golden() {
  json golden = json::parse(corpus::entry("accident").expectations);
  Built b = build(corpus::accident_text());
  Hypertree ht(b.gm, b.bn);
  const auto& subnets = ht.subnets();
  std::map<std::string, int> by_path;
  for (std::size_t s = 0; s < subnets.size(); ++s) by_path[subnets[s].path] = static_cast<int>(s);
  int membership_ok = 0;
  for (auto& [path, members] : golden["subnets"].items()) {
    if (!by_path.count(path)) continue;
    std::set<std::string> got;
    for (int v : subnets[by_path[path]].sigma) got.insert(b.bn->vars[v].id.substr(10));
    membership_ok += got == members.get<std::set<std::string>>();
  }
  std::set<std::pair<std::string, std::string>> edges, expected;
  for (const auto& s : subnets) {
    if (s.parent >= 0) edges.insert({subnets[s.parent].path, s.path});
  }
  for (const auto& e : golden["adjacency"]) expected.insert({e[0].get<std::string>(), e[1].get<std::string>()});
  bool weather_road = !edges.count({"Situation.Weather", "Situation.Road"}) &&
                      !edges.count({"Situation.Road", "Situation.Weather"});
  std::set<std::string> road_sep;
  for (int v : ht.dsepset(by_path["Situation.Road"])) road_sep.insert(b.bn->vars[v].id);
  bool routed = road_sep.count("Situation.Weather.Wetness") && subnets[by_path["Situation.Road"]].parent == 0;
  bool pass = subnets.size() == golden["subnets"].size() &&
              membership_ok == static_cast<int>(golden["subnets"].size()) && edges == expected && weather_road &&
              routed;
  return {pass, std::to_string(subnets.size()) + " subnets, " + std::to_string(membership_ok) + "/" +
                    std::to_string(golden["subnets"].size()) + " memberships exact, adjacency " +
                    (edges == expected ? "exact" : "differs") + ", Weather-Road adjacent: " +
                    (weather_road ? "no" : "yes") + ", Wetness via root: " + (routed ? "yes" : "no")};
}

// Mutations at the token level keep inputs close to valid models.
std::string mutate(const std::string& text, std::mt19937_64& rng) {
  std::vector<std::string> toks;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c)) || std::string("{}();:,=").find(c) != std::string::npos) {
      if (!cur.empty()) toks.push_back(cur);
      cur.clear();
      toks.emplace_back(1, c);
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) toks.push_back(cur);
  int edits = 1 + static_cast<int>(rng() % 3);
  for (int e = 0; e < edits && !toks.empty(); ++e) {
    std::size_t i = rng() % toks.size(), j = rng() % toks.size();
    switch (rng() % 5) {
      case 0: toks.erase(toks.begin() + static_cast<long>(i)); break;
      case 1: toks.insert(toks.begin() + static_cast<long>(i), toks[j]); break;
      case 2: std::swap(toks[i], toks[j]); break;
      case 3: toks[i] = std::to_string(rng() % 3) + "." + std::to_string(rng() % 1000); break;
      default: toks[i] = toks[j];
    }
  }
  std::string out;
  for (const auto& t : toks) out += t;
  return out;
}

Outcome fuzz() {
  std::mt19937_64 rng(99);
  std::map<std::string, int> codes_seen;
  int accepted = 0, untyped = 0, internal = 0;
  auto attempt = [&](const std::function<void()>& f) {
    try {
      f();
      ++accepted;
    } catch (const Error& e) {
      ++codes_seen[e.code()];
      internal += e.code() == codes::kInternal;
    } catch (...) {
      ++untyped;
    }
  };
  std::vector<std::string> seeds;
  for (int i = 0; i < 40; ++i) seeds.push_back(corpus::random_model_text(static_cast<std::uint64_t>(i) + 500));
  seeds.push_back(corpus::accident_text());

  ModelRef acc = compile_text(corpus::accident_text());
  Session session(acc, {Engine::kMsbn, std::make_shared<ClassCache>()});
  Session flat(acc, {Engine::kFlat});
  std::vector<std::string> words;
  for (const auto& v : session.bn().vars) {
    words.push_back(v.id.substr(10));
    for (const auto& x : v.type->values()) words.push_back(x);
  }
  for (const char* w : {"Car", "Driver", "Situation", "", ".", "..", "Engine", "true", "x=y"}) words.push_back(w);

  const int bytes = kFuzzInputs * 3 / 10, ast = kFuzzInputs * 4 / 10, queries = kFuzzInputs - bytes - ast;
  for (int i = 0; i < bytes; ++i) {
    std::string s(rng() % 64, '\0');
    for (char& c : s) c = static_cast<char>(rng() % 256);
    if (i % 2) s = "situation {" + s;
    attempt([&] { build(s); });
  }
  for (int i = 0; i < ast; ++i) {
    const std::string& base = i % 50 == 0 ? seeds.back() : seeds[rng() % (seeds.size() - 1)];
    std::string text = mutate(base, rng);
    attempt([&] {
      Built b = build(text);
      Hypertree ht(b.gm, b.bn);
      ht.marginal({0});
    });
  }
  for (int i = 0; i < queries; ++i) {
    auto word = [&] {
      std::string w = words[rng() % words.size()];
      if (rng() % 8 == 0 && !w.empty()) w[rng() % w.size()] = static_cast<char>(rng() % 256);
      return w;
    };
    Session& s = i % 4 == 0 ? flat : session;
    switch (rng() % 4) {
      case 0: attempt([&] { s.query({word()}, {{word(), word()}}); }); break;
      case 1: attempt([&] { s.assert_evidence(word(), word()); }); break;
      case 2: attempt([&] { s.retract_evidence(word()); }); break;
      default: attempt([&] { s.query({word(), word()}); });
    }
    if (s.evidence().size() > 3) {
      for (const auto& e : s.evidence()) s.retract_evidence(e.path);
    }
  }
  std::ostringstream seen;
  int shown = 0;
  for (const auto& [code, n] : codes_seen) seen << (shown++ ? " " : "") << code << "=" << n;
  return {untyped == 0 && internal == 0,
          std::to_string(kFuzzInputs) + " inputs (" + std::to_string(bytes) + " bytes, " + std::to_string(ast) +
              " token mutations, " + std::to_string(queries) + " session ops): " + std::to_string(accepted) +
              " accepted, " + std::to_string(untyped) + " untyped failures, " + std::to_string(internal) +
              " internal; codes " + seen.str()};
}

}  // namespace

int main(int argc, char** argv) {
  std::string only = argc == 3 && std::string(argv[1]) == "--only" ? argv[2] : "";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle-equivalence", oracle_equivalence},
      {"engine-cross-check", engine_cross_check},
      {"io-set-separation", io_sets_separate},
      {"declaration-order", declaration_order_invariance},
      {"scaling", scaling},
      {"iconization", iconization},
      {"refinement-locality", refinement_locality},
      {"type-system", type_system},
      {"hypertree-golden", fig2_golden},
      {"fuzz", fuzz},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && name != only) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %-20s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
