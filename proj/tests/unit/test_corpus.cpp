#include "doctest.h"
#include "json.hpp"
#include "oobn/corpus.hpp"
#include "oobn/flatten.hpp"

using namespace oobn;

TEST_CASE("corpus entries are named and described") {
  std::vector<std::string> names;
  for (const auto& e : corpus::entries()) {
    names.push_back(e.name);
    CHECK_FALSE(e.description.empty());
    CHECK_NOTHROW(compile_text(e.text));
    if (!e.expectations.empty()) CHECK_FALSE(nlohmann::json::parse(e.expectations, nullptr, false).is_discarded());
  }
  CHECK(std::find(names.begin(), names.end(), "accident") != names.end());
  CHECK_THROWS_AS(corpus::entry("missing"), std::out_of_range);
  CHECK(corpus::accident_model() == dsl::parse_model_or_throw(corpus::accident_text()));
  CHECK(corpus::subclass_suite().size() == corpus::subclass_suite_names().size());
}

TEST_CASE("accident model has the expected classes") {
  ModelRef m = compile_text(corpus::accident_text());
  for (const char* c : {"CAR", "ENGINE", "STEERING", "TIRES", "BRAKES", "WEATHER", "ROAD", "DRIVER", "PERSON"}) {
    CHECK(m->find_class(c));
  }
  CHECK(m->find_class("DRIVER")->parent == "PERSON");
  for (const char* a : {"Driver", "Car", "Weather", "Road", "Damage"}) CHECK(m->situation->attr(a));
}

TEST_CASE("random models respect their size limits") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    std::string text = corpus::random_model_text(seed);
    CHECK(text == corpus::random_model_text(seed));
    GroundModel gm = instantiate(*compile_text(text));
    FlatBN bn = build_flat_bn(gm);
    CHECK(bn.vars.size() <= 14);
    for (const auto& v : bn.vars) CHECK(v.size() == 2);
    // At most three levels of complex objects below the situation.
    for (const auto& o : gm.objects) CHECK(o.sigma.size() <= (o.simple() ? 5u : 4u));
  }
}

TEST_CASE("random classes compile with at least one simple output") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ModelRef m = compile_text(corpus::random_class_text(seed, "K"));
    ClassRef k = m->find_class("K");
    REQUIRE(k);
    CHECK_FALSE(k->output_labels().empty());
    CHECK(k->inputs.size() >= 1);
    for (const auto& a : k->attrs) CHECK(a.simple());
  }
}

TEST_CASE("families grow by one car per step") {
  for (int k : {1, 2, 4}) {
    FlatBN bn = build_flat_bn(instantiate(*compile_text(corpus::generate_family_text(k, 1))));
    for (int i = 1; i <= k; ++i) {
      CHECK(bn.find("Car" + std::to_string(i) + ".Max-Speed") >= 0);
      CHECK(bn.find("Risk" + std::to_string(i)) >= 0);
    }
    CHECK(bn.find("Car" + std::to_string(k + 1) + ".Max-Speed") < 0);
  }
  CHECK(corpus::generate_family_text(3, 1) != corpus::generate_family_text(3, 2));
}

TEST_CASE("random lattices only hold total surjective maps") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    corpus::TypeLattice lat = corpus::random_type_lattice(seed);
    for (const auto& a : lat.types) {
      for (const auto& b : lat.types) {
        const CoarseningMap* m = lat.maps.find(a->name(), b->name());
        if (!m) continue;
        CHECK(static_cast<int>(m->image.size()) == a->size());
        std::vector<bool> hit(b->size(), false);
        for (int x : m->image) hit[x] = true;
        CHECK(std::all_of(hit.begin(), hit.end(), [](bool h) { return h; }));
      }
    }
  }
}
