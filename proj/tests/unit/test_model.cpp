#include "doctest.h"
#include "oobn/corpus.hpp"
#include "oobn/flatten.hpp"
#include "support.hpp"

using namespace oobn;

namespace {

const char* kChainModel = R"(
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

std::string code_of(const std::string& text) {
  try {
    ModelRef m = compile_text(text);
    build_flat_bn(instantiate(*m));
  } catch (const Error& e) {
    return e.code();
  }
  return "ok";
}

}  // namespace

TEST_CASE("hand-computed marginals of a two-level chain") {
  ModelRef m = compile_text(kChainModel);
  GroundModel gm = instantiate(*m);
  FlatBN bn = build_flat_bn(gm);
  REQUIRE(bn.vars.size() == 4);
  double h = 0.3 * 0.9 + 0.7 * 0.2;
  double o = h * 0.7 + (1 - h) * 0.4;
  double y = o * 0.6 + (1 - o) * 0.1;
  Factor fo = enumerate_joint(bn, {}, {bn.find("X.O")});
  Factor fy = enumerate_joint(bn, {}, {bn.find("Y")});
  CHECK(fo.table[0] == doctest::Approx(o).epsilon(1e-12));
  CHECK(fy.table[0] == doctest::Approx(y).epsilon(1e-12));
  // P(S = true | Y = true) by Bayes' rule.
  double o_s = 0.9 * 0.7 + 0.1 * 0.4;
  double y_s = o_s * 0.6 + (1 - o_s) * 0.1;
  Factor fs = enumerate_joint(bn, {{bn.find("Y"), 0}}, {bn.find("S")});
  CHECK(fs.table[0] == doctest::Approx(0.3 * y_s / y).epsilon(1e-12));
}

TEST_CASE("object tree follows topological attribute order") {
  ModelRef m = compile_text(corpus::accident_text());
  GroundModel gm = instantiate(*m);
  CHECK(gm.root().path == "Situation");
  CHECK(gm.sigma_label(0) == "1");
  // Preorder by sigma: every object comes after its container, and labels
  // increase lexicographically.
  for (std::size_t i = 1; i < gm.objects.size(); ++i) {
    CHECK(gm.objects[i].container < static_cast<int>(i));
    CHECK(gm.objects[i - 1].sigma < gm.objects[i].sigma);
  }
  int car = gm.find("Situation.Car");
  int driver = gm.find("Situation.Driver");
  REQUIRE(car >= 0);
  CHECK(driver < car);  // Car reads Driver through Owner
  CHECK(gm.is_descendant(gm.find("Situation.Car.Engine.Wear"), car));
  CHECK_FALSE(gm.is_descendant(driver, car));
}

TEST_CASE("flat variables are in a topological order") {
  for (const auto& e : corpus::entries()) {
    FlatBN bn = build_flat_bn(instantiate(*compile_text(e.text)));
    for (std::size_t v = 0; v < bn.vars.size(); ++v) {
      for (int p : bn.vars[v].parents) CHECK(p < static_cast<int>(v));
      Factor f = bn.cpt_factor(static_cast<int>(v));
      // Every CPT row sums to one.
      std::size_t k = bn.vars[v].size();
      for (std::size_t r = 0; r < f.table.size(); r += k) {
        double s = 0;
        for (std::size_t i = 0; i < k; ++i) s += f.table[r + i];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("an input chain resolves through its binding") {
  ModelRef m = compile_text(corpus::accident_text());
  GroundModel gm = instantiate(*m);
  int engine = gm.find("Situation.Car.Engine");
  int maint = gm.find("Situation.Car.Maintenance");
  CHECK(resolve_chain(gm, engine, {"Maintenance"}) == maint);
  int car = gm.find("Situation.Car");
  CHECK(resolve_chain(gm, car, {"Owner", "Income"}) == gm.find("Situation.Driver.Income"));
  CHECK_THROWS_AS(resolve_chain(gm, car, {"Owner", "Salary"}), Error);
}

TEST_CASE("a coarser slot type reads a finer source through the map") {
  ModelRef m = compile_text(corpus::entry("accident_rich").text);
  GroundModel gm = instantiate(*m);
  FlatBN bn = build_flat_bn(gm);
  int type = bn.find("Car.Type");
  int income = bn.find("Driver.Income");
  REQUIRE(type >= 0);
  REQUIRE(bn.vars[income].size() == 6);
  ModelRef base = compile_text(corpus::accident_text());
  const ValueAttr* decl = base->find_class("CAR")->attr("Type");
  // Rows for $80-130K, $130-250K and $250K+ all repeat the $80K+ row.
  Factor f = bn.cpt_factor(type);
  REQUIRE(f.vars.front() == income);
  int k = bn.vars[type].size();
  for (int fine = 0; fine < 6; ++fine) {
    int coarse = std::min(fine, 3);
    for (int x = 0; x < k; ++x) CHECK(f.table[fine * k + x] == decl->cpt[coarse * k + x]);
  }
}

TEST_CASE("annotation errors are caught before unrolling") {
  CHECK(code_of(kChainModel) == "ok");
  CHECK(code_of(R"(
class K { input I : Boolean; output O : Boolean (I <- I) { (true) : 0.5, 0.5; (false) : 0.5, 0.5; } }
situation { private X : K; }
)") == codes::kAnnotType);
  CHECK(code_of(R"(
class K { input I : Boolean; output O : Boolean (I <- I) { (true) : 0.5, 0.5; (false) : 0.5, 0.5; } }
situation { private S : Boolean { () : 0.5, 0.5; } private X : K (I <- S.Nope); }
)") == codes::kAnnotType);
  CHECK(code_of(R"(
type T = {a, b, c};
class K { input I : Boolean; output O : Boolean (I <- I) { (true) : 0.5, 0.5; (false) : 0.5, 0.5; } }
situation { private S : T { () : 0.2, 0.3, 0.5; } private X : K (I <- S); }
)") == codes::kAnnotType);
}

TEST_CASE("overrides substitute classes before unrolling") {
  ModelRef m = compile_text(corpus::entry("accident_full").text);
  GroundModel gm = instantiate(*m, {{"Car", m->find_class("SPORTS-CAR")}});
  CHECK(gm.objects[gm.find("Situation.Car")].cls->name == "SPORTS-CAR");
  CHECK(gm.find("Situation.Car.Engine.Fuel-Injection-System.Status") >= 0);
  CHECK_THROWS_AS(instantiate(*m, {{"Nowhere", m->find_class("CAR")}}), Error);
  try {
    instantiate(*m, {{"Road", m->find_class("ENGINE")}});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == codes::kTypeCompat);
  }
}

TEST_CASE("a class unrolled alone leaves its inputs free") {
  ModelRef m = compile_text(corpus::accident_text());
  ClassRef engine = m->find_class("ENGINE");
  GroundModel gm = instantiate_class(engine, m->types.maps);
  FlatBN bn = build_flat_bn(gm);
  int free = 0;
  for (const auto& v : bn.vars) free += v.free_input;
  CHECK(free == 2);
  CHECK(bn.find("ENGINE.Maintenance") >= 0);
  CHECK(bn.vars[bn.find("ENGINE.Maintenance")].free_input);
  try {
    resolve_chain(gm, 0, {"Maintenance"});
    FAIL("expected E_UNBOUND_INPUT");
  } catch (const Error& e) {
    CHECK(e.code() == codes::kUnboundInput);
  }
  CHECK(resolve_chain_target(gm, 0, {"Maintenance"}).root_input_chain == std::vector<std::string>{"Maintenance"});
}
