#include <algorithm>
#include <random>

#include "doctest.h"
#include "oobn/corpus.hpp"
#include "oobn/session.hpp"
#include "support.hpp"

using namespace oobn;
using oobn::test::max_abs_diff;

namespace {

ModelRef full_model() {
  static ModelRef m = compile_text(corpus::entry("accident_full").text);
  return m;
}

// Fresh session over the model with the given path -> (class, iconized) overrides.
Factor scratch_posterior(const ModelRef& m, const ClassOverrides& ov, const std::vector<EvidenceItem>& ev,
                         const std::string& target) {
  GroundModel gm = instantiate(*m, ov);
  FlatBN bn = build_flat_bn(gm);
  Assignment a;
  for (const auto& e : ev) {
    int v = bn.object_var[resolve_chain(gm, 0, split_path(e.path))];
    const auto& vals = bn.vars[v].type->values();
    a.emplace_back(v, static_cast<int>(std::find(vals.begin(), vals.end(), e.value) - vals.begin()));
  }
  JunctionTree jt(bn);
  for (auto [v, x] : a) jt.set_evidence(v, x);
  jt.calibrate();
  return jt.marginal({bn.object_var[resolve_chain(gm, 0, split_path(target))]});
}

}  // namespace

TEST_CASE("query accepts encapsulated evidence and agrees across engines") {
  ModelRef m = compile_text(corpus::accident_text());
  Session flat(m, {Engine::kFlat});
  Session msbn(m, {Engine::kMsbn, std::make_shared<ClassCache>()});
  std::vector<EvidenceItem> ev = {{"Driver.Age", "0-20yr"}, {"Road.Location", "rural"}};
  QueryResult a = flat.query({"Damage"}, ev);
  QueryResult b = msbn.query({"Damage"}, ev);
  CHECK(a.variables == std::vector<std::string>{"Situation.Damage"});
  CHECK(max_abs_diff(a.table, b.table) < 1e-9);
  // Evidence in the call does not persist.
  CHECK(flat.evidence().empty());
  CHECK(msbn.evidence().empty());
}

TEST_CASE("assert and retract evidence") {
  ModelRef m = compile_text(corpus::accident_text());
  Session s(m);
  Factor prior = s.query({"Accident"}).table;
  s.assert_evidence("Road.Location", "rural");
  Factor post = s.query({"Accident"}).table;
  CHECK(max_abs_diff(prior, post) > 1e-6);
  CHECK(s.evidence().size() == 1);
  s.retract_evidence("Road.Location");
  CHECK(max_abs_diff(prior, s.query({"Accident"}).table) < 1e-9);

  try {
    s.assert_evidence("Road.Location", "moon");
    FAIL("expected E_BAD_VALUE");
  } catch (const Error& e) {
    CHECK(e.code() == codes::kBadValue);
  }
  try {
    s.query({"Car.Engine"});
    FAIL("expected E_BAD_CHAIN");
  } catch (const Error& e) {
    CHECK(e.code() == codes::kBadChain);
  }
}

TEST_CASE("lazy calibration touches only the root-to-leaf path") {
  ModelRef m = compile_text(corpus::accident_text());
  Session s(m);
  s.query({"Car.Engine.Wear"});
  CHECK(s.cost_report().recalibrated ==
        std::vector<std::string>{"Situation", "Situation.Car", "Situation.Car.Engine"});
  s.query({"Car.Engine.Power"});
  CHECK(s.cost_report().recalibrated.empty());
}

TEST_CASE("iconized ENGINE and CAR reproduce the interface distribution") {
  ModelRef m = full_model();
  for (const char* name : {"ENGINE", "CAR", "TIRES", "SPORTS-CAR", "ROAD"}) {
    CAPTURE(name);
    ClassRef cls = m->find_class(name);
    ClassRef icon = iconize(cls, m->types.maps);
    CHECK(icon->iconized_from == name);
    CHECK(icon->output_labels() == cls->output_labels());
    CHECK(oobn::test::conditional_gap(cls, icon, m->types.maps) < 1e-9);
  }
}

TEST_CASE("iconized class has no encapsulated attributes") {
  ModelRef m = full_model();
  ClassRef icon = iconize(m->find_class("CAR"), m->types.maps);
  for (const auto& a : icon->attrs) CHECK(a.output);
  CHECK(interface_violation(interface_type(*icon), interface_type(*m->find_class("CAR")), m->maps()) == std::nullopt);
}

TEST_CASE("iconize refuses complex outputs and oversized chains") {
  ModelRef m = compile_text(
      "type T = {a, b, c, d};\n"
      "class IN { output X : T { () : 0.1, 0.2, 0.3, 0.4; } }\n"
      "class OUTER { output Inner : IN; }\n"
      "situation { private O : OUTER; }\n");
  try {
    iconize(m->find_class("OUTER"), m->types.maps);
    FAIL("expected E_ICONIZE");
  } catch (const Error& e) {
    CHECK(e.code() == codes::kIconize);
  }
  ModelRef car = full_model();
  try {
    iconize(car->find_class("CAR"), car->types.maps, 8);
    FAIL("expected E_TOO_LARGE");
  } catch (const Error& e) {
    CHECK(e.code() == codes::kTooLarge);
  }
}

TEST_CASE("substitute on an iconized car does no interior work") {
  ModelRef m = full_model();
  Session s(m, {Engine::kMsbn, std::make_shared<ClassCache>()});
  s.assert_evidence("Driver.Age", "0-20yr");
  LocalityStats ic = s.apply({RefinementOp::Kind::kIconize, "Car", ""});
  CHECK(std::find(ic.removed.begin(), ic.removed.end(), "Situation.Car.Engine") != ic.removed.end());
  for (const auto& p : ic.recalibrated) CHECK((p == "Situation" || p == "Situation.Car"));

  LocalityStats sub = s.apply({RefinementOp::Kind::kSubstitute, "Car", "SPORTS-CAR"});
  CHECK(sub.rebuilt_inside.empty());
  CHECK(!sub.messages_updated.empty());
  for (const auto& p : sub.recalibrated) CHECK((p == "Situation" || p == "Situation.Car"));
  CHECK(s.is_iconized("Car"));

  LocalityStats de = s.apply({RefinementOp::Kind::kDeiconize, "Car", ""});
  CHECK(!de.rebuilt_inside.empty());
  for (const auto& p : de.rebuilt) CHECK((p == "Situation.Car" || p.rfind("Situation.Car.", 0) == 0));
  for (const auto& p : de.recalibrated) CHECK((p == "Situation.Car" || p.rfind("Situation.Car.", 0) == 0));

  ClassOverrides ov{{"Car", m->find_class("SPORTS-CAR")}};
  std::vector<EvidenceItem> ev = {{"Driver.Age", "0-20yr"}};
  for (const char* t : {"Damage", "Accident", "Car.Max-Speed", "Car.Engine.Power", "Road.Condition"}) {
    CAPTURE(t);
    CHECK(max_abs_diff(s.query({t}).table, scratch_posterior(m, ov, ev, t)) < 1e-6);
  }
}

TEST_CASE("substitute to the same class rebuilds nothing") {
  ModelRef m = full_model();
  Session s(m);
  Factor before = s.query({"Injury"}).table;
  LocalityStats st = s.apply({RefinementOp::Kind::kSubstitute, "Car", "CAR"});
  CHECK(st.rebuilt.empty());
  CHECK(st.recalibrated.empty());
  CHECK(max_abs_diff(before, s.query({"Injury"}).table) < 1e-9);
}

TEST_CASE("refinement errors leave the session unchanged") {
  ModelRef m = full_model();
  Session s(m);
  s.assert_evidence("Car.Engine.Wear", "heavy");
  auto code_of = [&](const RefinementOp& op) {
    try {
      s.apply(op);
    } catch (const Error& e) {
      return e.code();
    }
    return std::string("ok");
  };
  CHECK(code_of({RefinementOp::Kind::kIconize, "Car", ""}) == codes::kEvidenceOrphaned);
  CHECK(code_of({RefinementOp::Kind::kSubstitute, "Car", "ENGINE"}) == codes::kIncompatibleClass);
  CHECK(code_of({RefinementOp::Kind::kSubstitute, "Car", "NO-SUCH"}) == codes::kIncompatibleClass);
  CHECK(code_of({RefinementOp::Kind::kIconize, "Nowhere", ""}) == codes::kUnknownPath);
  CHECK(code_of({RefinementOp::Kind::kIconize, "Speed", ""}) == codes::kUnknownPath);
  CHECK(code_of({RefinementOp::Kind::kDeiconize, "Car", ""}) == codes::kIconize);
  CHECK(code_of({RefinementOp::Kind::kSubstitute, "Road", "COMMUTE-ROAD"}) == codes::kIncompatibleClass);
  CHECK(s.history().empty());
  CHECK(s.evidence().size() == 1);
}

TEST_CASE("compatible classes at a slot") {
  ModelRef m = full_model();
  Session s(m);
  auto car = s.compatible_classes("Car");
  CHECK(std::find(car.begin(), car.end(), "CAR") != car.end());
  CHECK(std::find(car.begin(), car.end(), "SPORTS-CAR") != car.end());
  CHECK(std::find(car.begin(), car.end(), "ENGINE") == car.end());
  auto road = s.compatible_classes("Road");
  CHECK(std::find(road.begin(), road.end(), "COMMUTE-ROAD") == road.end());
}

TEST_CASE("zero-probability evidence is rejected and rolled back") {
  ModelRef m = compile_text(
      "class K { output X : Boolean { () : 1, 0; } }\n"
      "situation { private A : K; private Y : Boolean (P <- A.X) { (true) : 0.3, 0.7; (false) : 0.6, 0.4; } }\n");
  for (Engine e : {Engine::kFlat, Engine::kMsbn}) {
    Session s(m, {e});
    Factor prior = s.query({"Y"}).table;
    try {
      s.assert_evidence("A.X", "false");
      FAIL("expected E_ZERO_PROB");
    } catch (const Error& err) {
      CHECK(err.code() == codes::kZeroProb);
    }
    CHECK(s.evidence().empty());
    CHECK(max_abs_diff(prior, s.query({"Y"}).table) < 1e-12);
    CHECK_THROWS_AS(s.query({"Y"}, {{"A.X", "false"}}), Error);
    CHECK(max_abs_diff(prior, s.query({"Y"}).table) < 1e-12);
  }
}

TEST_CASE("replaying a session log is bit-for-bit deterministic") {
  ModelRef m = full_model();
  Session s(m);
  std::vector<QueryResult> original;
  s.assert_evidence("Driver.Age", "21-30yr");
  original.push_back(s.query({"Damage", "Injury"}));
  s.apply({RefinementOp::Kind::kIconize, "Car", ""});
  original.push_back(s.query({"Accident"}, {{"Weather.Precipitation", "rain"}}));
  s.apply({RefinementOp::Kind::kSubstitute, "Car", "SPORTS-CAR"});
  s.apply({RefinementOp::Kind::kDeiconize, "Car", ""});
  s.retract_evidence("Driver.Age");
  original.push_back(s.query({"Car.Engine.Power"}));

  ReplayResult r = replay(m, s.log());
  REQUIRE(r.queries.size() == original.size());
  for (std::size_t i = 0; i < original.size(); ++i) CHECK(r.queries[i].table.table == original[i].table.table);

  try {
    replay(m, {"{\"op\":\"load\"}", "not json"});
    FAIL("expected E_BAD_LOG");
  } catch (const Error& e) {
    CHECK(e.code() == codes::kBadLog);
    CHECK(e.diagnostics().front().line == 2);
  }
}

TEST_CASE("random refinement sequences match a fresh build") {
  ModelRef m = full_model();
  const std::vector<std::string> targets = {"Damage", "Injury", "Car.Max-Speed", "Driver.Alertness"};
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 6; ++trial) {
    Session s(m, {Engine::kMsbn, std::make_shared<ClassCache>()});
    std::map<std::string, std::pair<std::string, bool>> state;  // path -> class, iconized
    for (int step = 0; step < 5; ++step) {
      const char* path = rng() % 2 ? "Car" : "Driver";
      const std::string p = path;
      auto& st = state.try_emplace(p, p == "Car" ? "CAR" : "DRIVER", false).first->second;
      RefinementOp op;
      op.path = p;
      switch (rng() % 3) {
        case 0:
          op.kind = st.second ? RefinementOp::Kind::kDeiconize : RefinementOp::Kind::kIconize;
          break;
        case 1:
          op.kind = RefinementOp::Kind::kSubstitute;
          op.cls = p == "Car" ? (rng() % 2 ? "SPORTS-CAR" : "CAR") : (rng() % 2 ? "RICH-DRIVER" : "DRIVER");
          break;
        default:
          op.kind = st.second ? RefinementOp::Kind::kDeiconize : RefinementOp::Kind::kIconize;
      }
      try {
        s.apply(op);
      } catch (const Error& e) {
        CHECK(e.code() == codes::kIconize);  // DRIVER has a complex output
        continue;
      }
      if (op.kind == RefinementOp::Kind::kSubstitute) st.first = op.cls;
      if (op.kind == RefinementOp::Kind::kIconize) st.second = true;
      if (op.kind == RefinementOp::Kind::kDeiconize) st.second = false;
    }
    ClassOverrides ov;
    for (const auto& [p, st] : state) {
      ClassRef c = m->find_class(st.first);
      ov[p] = st.second ? iconize(c, m->types.maps) : c;
    }
    for (const auto& t : targets) {
      CHECK(max_abs_diff(s.query({t}).table, scratch_posterior(m, ov, {}, t)) < 1e-6);
    }
  }
}
